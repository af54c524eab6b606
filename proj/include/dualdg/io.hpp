#pragma once

#include "dualdg/dmpc.hpp"
#include "dualdg/dual.hpp"
#include "dualdg/model.hpp"
#include "dualdg/sim.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dualdg::io {

using nlohmann::json;

/// Malformed or missing file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Serializes JSON with every floating-point value written as %.16e
/// (17 significant digits). Numeric arrays stay on one line.
std::string dump(const json& value);

/// 64-bit FNV-1a of the bytes.
std::uint64_t content_hash(const std::string& bytes);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

// Problem files. Indices are 0-based; matrices are row-major.
json problem_to_json(const BlockProblem<double>& problem);
BlockProblem<double> problem_from_json(const json& doc);
void write_problem(const std::string& path, const BlockProblem<double>& problem);
BlockProblem<double> read_problem(const std::string& path);

// Reference solutions, tagged with the hash of the problem file they belong to.
json reference_to_json(const RefSolution<double>& ref, std::uint64_t problem_hash);
RefSolution<double> reference_from_json(const json& doc, std::uint64_t* problem_hash = nullptr);

// System description files for the DMPC builder.
NetworkedSystem system_from_json(const json& doc);
json system_to_json(const NetworkedSystem& system);

inline constexpr const char* kTraceHeader = "k,dual,f,dual_subopt,primal_subopt,infeas_w,dist_z,step_w,prox_w";

void write_trace_csv(std::ostream& out, const RunTrace<double>& trace);
std::vector<TraceRow<double>> read_trace_csv(std::istream& in);

void write_message_log_csv(std::ostream& out, const MessageLog& log);

}  // namespace dualdg::io
