#include "cmcprobe/serialization.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "cmcprobe/errors.hpp"

namespace cmcprobe {

namespace {

double number_or_nan(const Json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw Error("cannot parse number '" + text + "'");
    return v;
}

Json to_json(const SphereGraph& graph) {
    Json coeffs = Json::array();
    for (int l = 0; l <= graph.degree(); ++l)
        for (int m = -l; m <= l; ++m) {
            const double v = graph.coefficient(l, m);
            if (std::abs(v) >= 1e-15) coeffs.push_back(Json::array({l, m, v}));
        }
    Json j;
    j["center"] = vec_json(graph.center());
    j["scale"] = graph.scale();
    j["L"] = graph.degree();
    j["coeffs"] = std::move(coeffs);
    return j;
}

SphereGraph graph_from_json(const Json& j) {
    const auto& c = j.at("center");
    const Vec3 center(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    const int L = j.at("L").get<int>();
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(mode_count(L));
    for (const auto& e : j.at("coeffs")) {
        const int l = e.at(0).get<int>(), m = e.at(1).get<int>();
        if (l < 0 || l > L || std::abs(m) > l) throw EmbeddingError("coefficient index out of range");
        coeffs[mode_index(l, m)] = e.at(2).get<double>();
    }
    return SphereGraph(center, j.at("scale").get<double>(), L, std::move(coeffs));
}

Json to_json(const FunctionalReport& r) {
    Json j;
    j["area"] = r.area;
    j["willmore"] = r.willmore;
    j["hawking"] = r.hawking;
    j["cy_lhs"] = r.cy_lhs;
    j["cy_rhs"] = r.cy_rhs;
    j["dlm_lambda"] = r.dlm_lambda;
    j["dlm_ratio"] = r.dlm_ratio;
    j["minkowski_deficit"] = r.minkowski_deficit;
    j["flux"] = r.flux;
    j["r0"] = r.r0;
    j["H_mean"] = r.H_mean;
    return j;
}

FunctionalReport report_from_json(const Json& j) {
    FunctionalReport r;
    r.area = number_or_nan(j.at("area"));
    r.willmore = number_or_nan(j.at("willmore"));
    r.hawking = number_or_nan(j.at("hawking"));
    r.cy_lhs = number_or_nan(j.at("cy_lhs"));
    r.cy_rhs = number_or_nan(j.at("cy_rhs"));
    r.dlm_lambda = number_or_nan(j.at("dlm_lambda"));
    r.dlm_ratio = number_or_nan(j.at("dlm_ratio"));
    r.minkowski_deficit = number_or_nan(j.at("minkowski_deficit"));
    r.flux = number_or_nan(j.at("flux"));
    r.r0 = number_or_nan(j.at("r0"));
    r.H_mean = number_or_nan(j.at("H_mean"));
    return r;
}

Json to_json(const SolveReport& r) {
    Json j;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["final_residual"] = r.final_residual;
    j["certified_residual"] = r.certified_residual;
    j["H_target"] = r.H_target;
    j["stability_eigenvalue"] = r.stability_eigenvalue;
    j["stable"] = r.stable;
    j["diagnostic"] = r.diagnostic;
    j["residual_history"] = r.residual_history;
    j["surface"] = to_json(r.surface);
    return j;
}

Json to_json(const FoliationTrace& t) {
    Json j;
    j["metric"] = {{"kind", to_string(t.metric.kind())}, {"mass", t.metric.mass()}};
    j["truncated"] = t.truncated;
    j["diagnostic"] = t.diagnostic;
    Json leaves = Json::array();
    for (const auto& l : t.leaves) leaves.push_back(to_json(l));
    j["leaves"] = std::move(leaves);
    return j;
}

Json to_json(const InequalityLedger& l) {
    Json j;
    j["tau"] = l.tau;
    j["delta"] = l.delta;
    j["gamma"] = l.gamma;
    j["gamma_measured"] = l.gamma_measured;
    j["coefficient"] = l.coefficient;
    j["tracefree_bar"] = l.tracefree_bar;
    j["tracefree_term"] = l.tracefree_term;
    j["flux"] = l.flux;
    j["favorable_term"] = l.favorable_term;
    j["lhs"] = l.lhs;
    j["err_x5"] = l.err_x5;
    j["err_h2_x3"] = l.err_h2_x3;
    j["err_Hh0_x2"] = l.err_Hh0_x2;
    j["err_H_x3"] = l.err_H_x3;
    j["err_H2_x2"] = l.err_H2_x2;
    j["error_sum"] = l.error_sum;
    j["r0"] = l.r0;
    j["H_mean"] = l.H_mean;
    j["r0H"] = l.r0H;
    j["divergence_residual"] = l.divergence_residual;
    return j;
}

Json to_json_value(const GeometrySummary& s) { return Json::parse(to_json(s)); }

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw Error("csv row width does not match header");
    rows.push_back(std::move(row));
}

std::string CsvTable::str() const {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os << ',';
            os << cells[i];
        }
        os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return os.str();
}

CsvTable CsvTable::parse(const std::string& text) {
    CsvTable t;
    std::istringstream is(text);
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            t.add_row(std::move(cells));
        }
    }
    return t;
}

std::string csv_cell(double value) { return format_double(value); }
std::string csv_cell(int value) { return std::to_string(value); }
std::string csv_cell(bool value) { return value ? "true" : "false"; }

}  // namespace cmcprobe
