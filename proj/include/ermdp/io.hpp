#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ermdp/mdp.hpp"
#include "ermdp/oracle.hpp"
#include "ermdp/sampling.hpp"
#include "ermdp/solvers.hpp"

namespace ermdp {

using Json = nlohmann::json;

// MDP documents -------------------------------------------------------------
//
// {
//   "format": "ermdp.mdp", "version": 1,
//   "num_states": S, "num_actions": A, "gamma": g,
//   "reward": [r[0][0], r[0][1], ...],            // row-major S×A
//   "transition": [P[0][0][0], P[0][0][1], ...]   // dense, row-major P[a][s][s']
//   or
//   "transition": {"support_indices": [[...], ...],   // one list per (a, s), a-major
//                  "support_prob": [[...], ...] | p}  // per-entry, or one shared value
// }

Json mdp_to_json(const MdpModel& mdp);
MdpModel mdp_from_json(const Json& doc);

// Oracle documents: the same conventions, with v*, pi*, u°, u* as flat arrays.
Json oracle_to_json(const OracleSolution& solution);
OracleSolution oracle_from_json(const Json& doc);

// Traces --------------------------------------------------------------------

inline constexpr std::string_view kTraceHeader = "iter,q,lyapunov,policy_error,value_error,fo_residual";

/// %.17g, with "inf"/"nan" spelled out.
std::string format_double(double x);

void write_trace_csv(std::ostream& out, const SolverTrace& trace);
Json config_to_json(const SolverConfig& config);
SolverConfig config_from_json(const Json& doc, const SolverConfig& defaults = {});
/// Config, variant, seeds and outcome of a run.
Json trace_sidecar(const SolverTrace& trace);

// Sample buffers --------------------------------------------------------------
//
// Binary layout, all little-endian:
//   bytes 0-7    magic "ERMDPBUF"
//   bytes 8-11   u32 version (1)
//   bytes 12-15  u32 num_states
//   bytes 16-19  u32 num_actions
//   bytes 20-23  u32 reserved (0)
//   bytes 24-31  u64 num_samples N
//   bytes 32-39  u64 seed
//   then three u32 columns of N entries each: state, action, next_state.

inline constexpr std::size_t kBufferHeaderBytes = 40;

void write_buffer(std::ostream& out, const SampleBuffer& buffer);
SampleBuffer read_buffer(std::istream& in);
Json buffer_manifest(const SampleBuffer& buffer, const std::string& data_file);

// Files -----------------------------------------------------------------------

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

Json read_json_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename.
void write_text_file(const std::filesystem::path& path, std::string_view content);
void write_json_file(const std::filesystem::path& path, const Json& doc);

void save_buffer(const std::filesystem::path& data_path, const SampleBuffer& buffer);
SampleBuffer load_buffer(const std::filesystem::path& data_path);

}  // namespace ermdp
