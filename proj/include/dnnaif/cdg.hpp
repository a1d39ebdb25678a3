#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnnaif/blackbox.hpp"

namespace dnnaif::cdg {

// A toy in-order dual-pipe machine: a simple pipe S (simple, load-store and
// branch instructions) and a complex pipe C, three stages each, fed in order
// from a four-entry dispatch buffer.
//
// Input layout (23 entries):
//   [0, 5)   instruction mix over {simple, complex, load-store, branch, nop}
//   [5, 9)   dependency probability per type (simple, complex, load-store, branch)
//   9        simple stall probability (extra cycles in S2)
//   10       complex long-latency probability (extra cycles in C2)
//   11       load-store miss probability (extra cycles in S3, LS unit busy)
//   12       dispatch hold probability (no fetch this cycle)
//   13       dual-fetch probability (second instruction fetched this cycle)
//   [14, 17) burst probability per type (simple, complex, load-store)
//   17       branch taken probability (flush of younger S/C stage-1 entries)
//   18       branch resolve delay probability (extra cycle in S2)
//   19       complex latency mix (long-latency length 1..4)
//   20       miss penalty mix (penalty length 1..6)
//   21       simple latency mix (stall length 1..3)
//   22       serializing-instruction probability (waits for both pipes to drain)
inline constexpr int kInputDim = 23;
inline constexpr int kMixDim = 5;
inline constexpr int kBufferCapacity = 4;

enum class InstrType : std::uint8_t { Simple, Complex, LoadStore, Branch, Nop };

namespace param {
inline constexpr int kDepBase = 5;
inline constexpr int kStallSimple = 9;
inline constexpr int kLongComplex = 10;
inline constexpr int kLsMiss = 11;
inline constexpr int kDispatchHold = 12;
inline constexpr int kDualFetch = 13;
inline constexpr int kBurstBase = 14;
inline constexpr int kBranchTaken = 17;
inline constexpr int kBranchDelay = 18;
inline constexpr int kComplexLatency = 19;
inline constexpr int kMissPenalty = 20;
inline constexpr int kSimpleLatency = 21;
inline constexpr int kSerialize = 22;
}  // namespace param

struct Instr {
  InstrType type = InstrType::Simple;
  int hold = 0;  // extra cycles to spend in the stall stage
  bool dependent = false;
  bool taken = false;
  bool serializing = false;
  std::uint64_t id = 0;  // dispatch order, starting at 1
};

/// Machine state observed at the end of a cycle.
struct PipelineState {
  std::array<std::optional<Instr>, 3> s;
  std::array<std::optional<Instr>, 3> c;
  int buffer = 0;
  bool ls_busy = false;        // a load-store miss is being serviced
  bool branch_active = false;  // a branch is in the S pipe
  bool flush = false;          // a taken branch flushed younger work this cycle
  bool stall_s = false;        // an S instruction could not advance
  bool stall_c = false;        // a C instruction could not advance
  bool dep_stall = false;      // dispatch blocked on a dependency
  bool serialize_wait = false; // dispatch blocked on a serializing instruction
  int dispatched = 0;          // instructions dispatched this cycle
};

enum class Flag {
  LsBusy,
  BranchActive,
  Flush,
  StallS,
  StallC,
  DepStall,
  SerializeWait,
  DualDispatch,
  ComplexChain,
};

inline constexpr std::array<Flag, 9> kAllFlags = {
    Flag::LsBusy,   Flag::BranchActive,  Flag::Flush,        Flag::StallS,      Flag::StallC,
    Flag::DepStall, Flag::SerializeWait, Flag::DualDispatch, Flag::ComplexChain,
};

std::string_view to_string(Flag flag);
Flag flag_from_string(std::string_view name);
bool flag_value(const PipelineState& state, Flag flag);

/// A coverage event: a conjunction over stage occupancy, buffer depth and flags.
/// stages is "S1S2S3C1C2C3" with '1' occupied, '0' empty, 'x' don't care.
struct EventDef {
  std::string name;
  std::string stages = "xxxxxx";
  int min_buffer = 0;
  int max_buffer = kBufferCapacity;
  std::vector<std::pair<Flag, bool>> flags;

  bool operator==(const EventDef&) const = default;
};

bool event_hit(const EventDef& event, const PipelineState& state);

using EventManifest = std::vector<EventDef>;

/// The built-in 35-event manifest (identical to data/events.json).
const EventManifest& default_events();
EventManifest parse_event_manifest(std::string_view text);
EventManifest load_event_manifest(const std::string& path);
std::string event_manifest_to_string(const EventManifest& events);

/// Clamps at 0 and renormalizes the mix (uniform when it sums to 0); clamps
/// the remaining entries to [0, 1].
Vector project_input(const Vector& x);
bool is_valid_input(const Vector& x, double tol = 1e-9);

class PipelineSimulator {
 public:
  /// x must already satisfy is_valid_input.
  PipelineSimulator(const Vector& x, std::uint64_t seed);

  const PipelineState& step();
  const PipelineState& state() const noexcept { return state_; }

 private:
  InstrType draw_type();
  Instr make_instr(InstrType type);
  bool producer_pending() const;
  void advance_pipe(std::array<std::optional<Instr>, 3>& pipe, bool& stalled);

  Vector x_;
  Rng rng_;
  PipelineState state_;
  std::vector<Instr> buffer_;
  std::optional<InstrType> last_type_;
  std::uint64_t last_id_ = 0;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

struct SimulationOptions {
  bool project = true;
  // When set, the state after every cycle is appended here.
  std::vector<PipelineState>* trace = nullptr;
};

/// Per-event hit counts over n_cycles simulated cycles.
std::vector<std::uint32_t> simulate(const Vector& x, int n_cycles, std::uint64_t seed,
                                    const EventManifest& events = default_events(),
                                    const SimulationOptions& options = {});

Vector estimate_probabilities(const Vector& x, int n_cycles, std::uint64_t seed,
                              const EventManifest& events = default_events(),
                              const SimulationOptions& options = {});

double weight(double t, double epsilon = 0.01);

/// -sum_j weight(p_j) p_j
double coverage_objective_value(const Vector& p, double epsilon = 0.01);

int unhit_count(const Vector& p, double threshold);

/// Mix ~ Dirichlet(alpha); other entries ~ U(0, 1).
Vector dirichlet_sample(std::span<const double> alpha, Rng& rng);

struct CdgSettings {
  int n_cycles = 1000;
  double epsilon = 0.01;
  double threshold = 0.05;
  std::uint64_t seed = 0;
  EventManifest events = default_events();
};

/// Hit counts of every evaluation, keyed by evaluation index. Shared between
/// the objective (writer) and the harness (reader).
class CoverageLog {
 public:
  void record(std::uint64_t eval_index, std::vector<std::uint32_t> counts);
  std::vector<std::uint32_t> counts(std::uint64_t eval_index) const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::vector<std::uint32_t>> counts_;
};

/// Running best-observed probability per event across tests.
class CoverageTracker {
 public:
  CoverageTracker(std::size_t events, double threshold);

  void add(const Vector& p);
  int unhit() const;
  const Vector& best() const noexcept { return best_; }

 private:
  Vector best_;
  double threshold_;
};

struct CdgProblem {
  Objective objective;
  std::shared_ptr<CoverageLog> log;
  CdgSettings settings;

  /// Unhit count after each logged evaluation, in evaluation order.
  std::vector<int> coverage_trace(std::size_t evaluations) const;
};

/// Noisy minimization objective: each evaluation simulates with a fresh seed
/// derived from (settings.seed, evaluation index).
CdgProblem make_cdg_problem(const CdgSettings& settings);

/// Default start: uniform mix, every other entry at 0.5.
Vector default_start();

/// Unhit count after each of budget Dirichlet-sampled tests.
std::vector<int> dirichlet_baseline(int budget, std::span<const double> alpha,
                                    const CdgSettings& settings);

}  // namespace dnnaif::cdg
