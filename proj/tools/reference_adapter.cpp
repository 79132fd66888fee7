// Serves the built-in reference repair over the adapter line protocol.
// Useful as a template for wrapping other repair systems.

#include <iostream>
#include <string>
#include <vector>

#include "dcshap/dc.hpp"
#include "dcshap/repair.hpp"
#include "dcshap/wire.hpp"

using namespace dcshap;
using wire::json;

static json answer(const std::string& line) {
  try {
    json request = json::parse(line);
    std::vector<DenialConstraint> constraints;
    for (const auto& text : request.at("constraints")) {
      constraints.push_back(parse_dc(text.get<std::string>()));
    }
    Table table = wire::table_from_json(request.at("table"));
    try {
      return {{"table", wire::to_json(reference_repair(constraints, table))}};
    } catch (const FixpointError& e) {
      return {{"error", e.what()}, {"last_table", wire::to_json(e.last_table())}};
    }
  } catch (const std::exception& e) {
    return {{"error", e.what()}};
  }
}

int main() {
  std::ios::sync_with_stdio(false);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    std::cout << answer(line).dump() << '\n' << std::flush;
  }
  return 0;
}
