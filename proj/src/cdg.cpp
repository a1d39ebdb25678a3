#include "dnnaif/cdg.hpp"

#include <algorithm>
#include <cmath>

namespace dnnaif::cdg {

namespace {

// Stage index where an instruction of this type serves its hold cycles.
int stall_stage(InstrType type) { return type == InstrType::LoadStore ? 2 : 1; }

bool occupied_by(const std::optional<Instr>& slot, InstrType type) {
  return slot.has_value() && slot->type == type;
}

}  // namespace

std::string_view to_string(Flag flag) {
  switch (flag) {
    case Flag::LsBusy: return "ls_busy";
    case Flag::BranchActive: return "branch_active";
    case Flag::Flush: return "flush";
    case Flag::StallS: return "stall_s";
    case Flag::StallC: return "stall_c";
    case Flag::DepStall: return "dep_stall";
    case Flag::SerializeWait: return "serialize_wait";
    case Flag::DualDispatch: return "dual_dispatch";
    case Flag::ComplexChain: return "complex_chain";
  }
  return "ls_busy";
}

Flag flag_from_string(std::string_view name) {
  for (Flag flag : kAllFlags) {
    if (to_string(flag) == name) return flag;
  }
  throw Error(ErrorKind::ParseError, "unknown event flag '" + std::string(name) + "'");
}

bool flag_value(const PipelineState& state, Flag flag) {
  switch (flag) {
    case Flag::LsBusy: return state.ls_busy;
    case Flag::BranchActive: return state.branch_active;
    case Flag::Flush: return state.flush;
    case Flag::StallS: return state.stall_s;
    case Flag::StallC: return state.stall_c;
    case Flag::DepStall: return state.dep_stall;
    case Flag::SerializeWait: return state.serialize_wait;
    case Flag::DualDispatch: return state.dispatched >= 2;
    case Flag::ComplexChain:
      return occupied_by(state.c[0], InstrType::Complex) &&
             occupied_by(state.c[1], InstrType::Complex);
  }
  return false;
}

bool event_hit(const EventDef& event, const PipelineState& state) {
  for (int i = 0; i < 6; ++i) {
    const char want = event.stages[static_cast<std::size_t>(i)];
    if (want == 'x') continue;
    const bool occupied = i < 3 ? state.s[static_cast<std::size_t>(i)].has_value()
                                : state.c[static_cast<std::size_t>(i - 3)].has_value();
    if (occupied != (want == '1')) return false;
  }
  if (state.buffer < event.min_buffer || state.buffer > event.max_buffer) return false;
  for (const auto& [flag, want] : event.flags) {
    if (flag_value(state, flag) != want) return false;
  }
  return true;
}

Vector project_input(const Vector& x) {
  if (x.size() != kInputDim) {
    throw Error(ErrorKind::DimensionMismatch, "simulator input must have 23 entries");
  }
  Vector p = x;
  auto mix = p.head(kMixDim);
  mix = mix.cwiseMax(0.0);
  const double total = mix.sum();
  if (total > 0.0 && std::isfinite(total)) {
    mix /= total;
  } else {
    mix.setConstant(1.0 / kMixDim);
  }
  p.tail(kInputDim - kMixDim) = p.tail(kInputDim - kMixDim).cwiseMax(0.0).cwiseMin(1.0);
  return p;
}

bool is_valid_input(const Vector& x, double tol) {
  if (x.size() != kInputDim || !x.allFinite()) return false;
  const auto mix = x.head(kMixDim);
  if (mix.minCoeff() < 0.0 || std::abs(mix.sum() - 1.0) > tol) return false;
  const auto rest = x.tail(kInputDim - kMixDim);
  return rest.minCoeff() >= 0.0 && rest.maxCoeff() <= 1.0;
}

PipelineSimulator::PipelineSimulator(const Vector& x, std::uint64_t seed)
    : x_(x), rng_(make_rng(seed, streams::kSimulator)) {
  if (!is_valid_input(x_)) throw Error(ErrorKind::InvalidInput, "simulator input out of range");
}

InstrType PipelineSimulator::draw_type() {
  if (last_type_ && *last_type_ <= InstrType::LoadStore) {
    const double burst = x_[param::kBurstBase + static_cast<int>(*last_type_)];
    if (unit_(rng_) < burst) return *last_type_;
  }
  double u = unit_(rng_);
  for (int t = 0; t < kMixDim - 1; ++t) {
    u -= x_[t];
    if (u < 0.0) return static_cast<InstrType>(t);
  }
  return InstrType::Nop;
}

Instr PipelineSimulator::make_instr(InstrType type) {
  Instr instr;
  instr.type = type;
  instr.dependent = unit_(rng_) < x_[param::kDepBase + static_cast<int>(type)];
  instr.serializing = unit_(rng_) < x_[param::kSerialize];
  switch (type) {
    case InstrType::Simple:
      if (unit_(rng_) < x_[param::kStallSimple]) {
        instr.hold = 1 + static_cast<int>(2.999 * x_[param::kSimpleLatency]);
      }
      break;
    case InstrType::Complex:
      if (unit_(rng_) < x_[param::kLongComplex]) {
        instr.hold = 1 + static_cast<int>(3.999 * x_[param::kComplexLatency]);
      }
      break;
    case InstrType::LoadStore:
      if (unit_(rng_) < x_[param::kLsMiss]) {
        instr.hold = 1 + static_cast<int>(5.999 * x_[param::kMissPenalty]);
      }
      break;
    case InstrType::Branch:
      instr.taken = unit_(rng_) < x_[param::kBranchTaken];
      if (unit_(rng_) < x_[param::kBranchDelay]) instr.hold = 1;
      break;
    case InstrType::Nop: break;
  }
  return instr;
}

void PipelineSimulator::advance_pipe(std::array<std::optional<Instr>, 3>& pipe, bool& stalled) {
  // Oldest first so that a freed stage can be refilled in the same cycle.
  for (int i = 2; i >= 0; --i) {
    auto& slot = pipe[static_cast<std::size_t>(i)];
    if (!slot) continue;
    if (slot->hold > 0 && stall_stage(slot->type) == i) {
      --slot->hold;
      stalled = true;
      continue;
    }
    if (i == 2) {
      if (slot->type == InstrType::Branch && slot->taken) state_.flush = true;
      slot.reset();
      continue;
    }
    auto& next = pipe[static_cast<std::size_t>(i + 1)];
    if (next) {
      stalled = true;
      continue;
    }
    next = std::move(slot);
    slot.reset();
  }
}

// True while the most recently dispatched instruction sits in stage 1 or 2.
bool PipelineSimulator::producer_pending() const {
  if (last_id_ == 0) return false;
  for (std::size_t i = 0; i < 2; ++i) {
    if (state_.s[i] && state_.s[i]->id == last_id_) return true;
    if (state_.c[i] && state_.c[i]->id == last_id_) return true;
  }
  return false;
}

const PipelineState& PipelineSimulator::step() {
  PipelineState& st = state_;
  st.flush = false;
  st.stall_s = false;
  st.stall_c = false;
  st.dep_stall = false;
  st.serialize_wait = false;
  st.dispatched = 0;

  advance_pipe(st.s, st.stall_s);
  advance_pipe(st.c, st.stall_c);
  if (st.flush) {
    st.s[0].reset();
    st.c[0].reset();
    buffer_.clear();
  }

  if (unit_(rng_) >= x_[param::kDispatchHold]) {
    const int fetches = unit_(rng_) < x_[param::kDualFetch] ? 2 : 1;
    for (int f = 0; f < fetches; ++f) {
      const InstrType type = draw_type();
      last_type_ = type;
      if (type == InstrType::Nop) continue;
      if (static_cast<int>(buffer_.size()) < kBufferCapacity) buffer_.push_back(make_instr(type));
    }
  }

  auto has = [](const std::optional<Instr>& v) { return v.has_value(); };
  for (int slot = 0; slot < 2 && !buffer_.empty(); ++slot) {
    const Instr& head = buffer_.front();
    const bool busy = std::any_of(st.s.begin(), st.s.end(), has) ||
                      std::any_of(st.c.begin(), st.c.end(), has);
    if (head.serializing && busy) {
      st.serialize_wait = true;
      break;
    }
    if (head.dependent && producer_pending()) {
      st.dep_stall = true;
      break;
    }
    auto& target = head.type == InstrType::Complex ? st.c[0] : st.s[0];
    if (target) break;
    target = head;
    target->id = ++last_id_;
    buffer_.erase(buffer_.begin());
    ++st.dispatched;
  }

  st.buffer = static_cast<int>(buffer_.size());
  st.ls_busy = occupied_by(st.s[2], InstrType::LoadStore) && st.s[2]->hold > 0;
  st.branch_active = std::any_of(st.s.begin(), st.s.end(), [](const auto& v) {
    return occupied_by(v, InstrType::Branch);
  });
  return st;
}

std::vector<std::uint32_t> simulate(const Vector& x, int n_cycles, std::uint64_t seed,
                                    const EventManifest& events,
                                    const SimulationOptions& options) {
  if (n_cycles < 1) throw Error(ErrorKind::InvalidInput, "n_cycles must be positive");
  const Vector input = options.project ? project_input(x) : x;
  if (!options.project && !is_valid_input(input)) {
    throw Error(ErrorKind::InvalidInput, "simulator input out of range");
  }
  PipelineSimulator sim(input, seed);
  std::vector<std::uint32_t> counts(events.size(), 0);
  for (int t = 0; t < n_cycles; ++t) {
    const PipelineState& st = sim.step();
    if (options.trace) options.trace->push_back(st);
    for (std::size_t j = 0; j < events.size(); ++j) {
      if (event_hit(events[j], st)) ++counts[j];
    }
  }
  return counts;
}

Vector estimate_probabilities(const Vector& x, int n_cycles, std::uint64_t seed,
                              const EventManifest& events, const SimulationOptions& options) {
  const std::vector<std::uint32_t> counts = simulate(x, n_cycles, seed, events, options);
  Vector p(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t j = 0; j < counts.size(); ++j) {
    p[static_cast<Eigen::Index>(j)] = static_cast<double>(counts[j]) / n_cycles;
  }
  return p;
}

double weight(double t, double epsilon) { return 1.0 / (epsilon + t); }

double coverage_objective_value(const Vector& p, double epsilon) {
  double total = 0.0;
  for (double pj : p) total += weight(pj, epsilon) * pj;
  return -total;
}

int unhit_count(const Vector& p, double threshold) {
  return static_cast<int>((p.array() < threshold).count());
}

Vector dirichlet_sample(std::span<const double> alpha, Rng& rng) {
  if (alpha.size() != static_cast<std::size_t>(kMixDim)) {
    throw Error(ErrorKind::DimensionMismatch, "Dirichlet alpha must have 5 entries");
  }
  Vector x(kInputDim);
  double total = 0.0;
  for (int i = 0; i < kMixDim; ++i) {
    const double a = alpha[static_cast<std::size_t>(i)];
    if (!(a > 0.0)) throw Error(ErrorKind::InvalidInput, "Dirichlet alpha must be positive");
    std::gamma_distribution<double> gamma(a, 1.0);
    x[i] = gamma(rng);
    total += x[i];
  }
  if (total > 0.0) {
    x.head(kMixDim) /= total;
  } else {
    x.head(kMixDim).setConstant(1.0 / kMixDim);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = kMixDim; i < kInputDim; ++i) x[i] = unit(rng);
  return x;
}

void CoverageLog::record(std::uint64_t eval_index, std::vector<std::uint32_t> counts) {
  std::lock_guard lock(mutex_);
  if (counts_.size() <= eval_index) counts_.resize(eval_index + 1);
  counts_[eval_index] = std::move(counts);
}

std::vector<std::uint32_t> CoverageLog::counts(std::uint64_t eval_index) const {
  std::lock_guard lock(mutex_);
  if (eval_index >= counts_.size()) {
    throw Error(ErrorKind::InvalidInput, "no coverage recorded for this evaluation");
  }
  return counts_[eval_index];
}

std::size_t CoverageLog::size() const {
  std::lock_guard lock(mutex_);
  return counts_.size();
}

CoverageTracker::CoverageTracker(std::size_t events, double threshold)
    : best_(Vector::Zero(static_cast<Eigen::Index>(events))), threshold_(threshold) {}

void CoverageTracker::add(const Vector& p) {
  if (p.size() != best_.size()) throw Error(ErrorKind::DimensionMismatch, "event count mismatch");
  best_ = best_.cwiseMax(p);
}

int CoverageTracker::unhit() const { return unhit_count(best_, threshold_); }

std::vector<int> CdgProblem::coverage_trace(std::size_t evaluations) const {
  CoverageTracker tracker(settings.events.size(), settings.threshold);
  std::vector<int> trace;
  trace.reserve(evaluations);
  for (std::size_t i = 0; i < evaluations; ++i) {
    const std::vector<std::uint32_t> c = log->counts(i);
    Vector p(static_cast<Eigen::Index>(c.size()));
    for (std::size_t j = 0; j < c.size(); ++j) {
      p[static_cast<Eigen::Index>(j)] = static_cast<double>(c[j]) / settings.n_cycles;
    }
    tracker.add(p);
    trace.push_back(tracker.unhit());
  }
  return trace;
}

CdgProblem make_cdg_problem(const CdgSettings& settings) {
  if (settings.n_cycles < 1) throw Error(ErrorKind::ValidationError, "n_cycles must be positive");
  if (!(settings.epsilon > 0.0)) throw Error(ErrorKind::ValidationError, "epsilon must be positive");
  if (settings.events.empty()) throw Error(ErrorKind::ValidationError, "event manifest is empty");
  CdgProblem problem;
  problem.settings = settings;
  problem.log = std::make_shared<CoverageLog>();
  auto log = problem.log;
  auto events = std::make_shared<const EventManifest>(settings.events);
  const int n_cycles = settings.n_cycles;
  const double epsilon = settings.epsilon;
  const std::uint64_t seed = settings.seed;
  problem.objective.dimension = kInputDim;
  problem.objective.descriptor = "cdg-toy";
  problem.objective.concurrent_safe = true;
  problem.objective.evaluator = [=](const Vector& x, std::uint64_t eval_index) {
    std::vector<std::uint32_t> counts =
        simulate(x, n_cycles, derive_seed(seed, streams::kSimulator, eval_index), *events);
    double total = 0.0;
    for (std::uint32_t c : counts) {
      const double p = static_cast<double>(c) / n_cycles;
      total += weight(p, epsilon) * p;
    }
    log->record(eval_index, std::move(counts));
    return -total;
  };
  return problem;
}

Vector default_start() {
  Vector x = Vector::Constant(kInputDim, 0.5);
  x.head(kMixDim).setConstant(1.0 / kMixDim);
  return x;
}

std::vector<int> dirichlet_baseline(int budget, std::span<const double> alpha,
                                    const CdgSettings& settings) {
  if (budget < 0) throw Error(ErrorKind::ValidationError, "budget must be >= 0");
  Rng rng = make_rng(settings.seed, streams::kDesign);
  CoverageTracker tracker(settings.events.size(), settings.threshold);
  std::vector<int> trace;
  trace.reserve(static_cast<std::size_t>(budget));
  for (int i = 0; i < budget; ++i) {
    const Vector x = dirichlet_sample(alpha, rng);
    tracker.add(estimate_probabilities(
        x, settings.n_cycles, derive_seed(settings.seed, streams::kSimulator, i), settings.events,
        {.project = false}));
    trace.push_back(tracker.unhit());
  }
  return trace;
}

}  // namespace dnnaif::cdg
