#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmcprobe/cmc_solver.hpp"
#include "cmcprobe/functionals.hpp"
#include "cmcprobe/surface_geometry.hpp"

namespace cmcprobe {

using Json = nlohmann::ordered_json;

// Shortest decimal string that parses back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double value);
double parse_double(const std::string& text);

Json to_json(const SphereGraph& graph);
SphereGraph graph_from_json(const Json& j);

Json to_json(const FunctionalReport& report);
FunctionalReport report_from_json(const Json& j);

Json to_json(const SolveReport& report);
Json to_json(const FoliationTrace& trace);
Json to_json(const InequalityLedger& ledger);
Json to_json_value(const GeometrySummary& summary);

// Plain comma-separated table with a header row; cells are stored as text.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    std::string str() const;
    static CsvTable parse(const std::string& text);
};

std::string csv_cell(double value);
std::string csv_cell(int value);
std::string csv_cell(bool value);

}  // namespace cmcprobe
