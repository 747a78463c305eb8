#include "byzsim/algorithms.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace byzsim {

std::string to_string(Method m) {
  switch (m) {
    case Method::Marina: return "marina";
    case Method::Marina2: return "marina2";
    case Method::DashaPage: return "dasha";
    case Method::EF21: return "ef21";
    case Method::EF21BC: return "ef21bc";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "marina") return Method::Marina;
  if (s == "marina2") return Method::Marina2;
  if (s == "dasha") return Method::DashaPage;
  if (s == "ef21") return Method::EF21;
  if (s == "ef21bc") return Method::EF21BC;
  throw ArgumentError("unknown algorithm '" + s + "'");
}

bool uses_unbiased_compression(Method m) {
  return m == Method::Marina || m == Method::Marina2 || m == Method::DashaPage;
}

void validate(const HyperParams& hp, Method method) {
  if (!(hp.gamma > 0.0)) throw ArgumentError("gamma must be positive");
  if (!(hp.p > 0.0 && hp.p <= 1.0)) throw ArgumentError("p must lie in (0, 1]");
  if (!(hp.a > 0.0 && hp.a <= 1.0)) throw ArgumentError("a must lie in (0, 1]");
  if (hp.b < 1) throw ArgumentError("batch size must be >= 1");
  if (uses_unbiased_compression(method)) {
    if (!is_unbiased(hp.uplink)) {
      throw ClassificationError(to_string(method) + " needs an unbiased uplink compressor, got " +
                                describe(hp.uplink));
    }
  } else {
    if (!is_contractive(hp.uplink)) {
      throw ClassificationError(to_string(method) + " needs a contractive uplink compressor, got " +
                                describe(hp.uplink));
    }
    if (method == Method::EF21BC && !is_contractive(hp.downlink)) {
      throw ClassificationError("ef21bc needs a contractive downlink compressor, got " +
                                describe(hp.downlink));
    }
  }
}

double default_p(Method method, double omega, std::size_t b, std::size_t m) {
  if (m == 0) throw ArgumentError("default_p: m must be positive");
  const double ratio = std::min(1.0, static_cast<double>(b) / static_cast<double>(m));
  if (method == Method::DashaPage) return ratio;
  return std::min(1.0 / (1.0 + omega), ratio);
}

double default_momentum(double omega) { return 1.0 / (2.0 * omega + 1.0); }

namespace {

// Stream tags. Worker streams are keyed by worker index, server streams by round.
enum : std::uint64_t {
  kCoinStream = 1,
  kWorkerStream = 2,
  kAggregateStream = 3,
  kDownlinkStream = 4,
  kInitAggregateStream = 5,
};
enum : std::uint64_t { kPurposeSample = 1, kPurposeCompress = 2 };

RngStream root_stream(std::uint64_t seed) { return RngStream(seed, 0); }

RngStream worker_stream(std::uint64_t seed, std::size_t worker, std::uint64_t t,
                        std::uint64_t purpose) {
  return root_stream(seed).substream(kWorkerStream, worker).substream(t, purpose);
}

std::size_t thread_count() {
  static const std::size_t n = [] {
    const char* env = std::getenv("BYZSIM_THREADS");
    if (env == nullptr) return std::size_t{1};
    const long v = std::strtol(env, nullptr, 10);
    return v > 1 ? static_cast<std::size_t>(v) : std::size_t{1};
  }();
  return n;
}

// Runs fn(i) for i in [0, n). Each i writes only its own slot, so the result
// does not depend on scheduling.
template <class Fn>
void for_each_worker(std::size_t n, Fn&& fn) {
  const std::size_t threads = std::min(thread_count(), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t k = 0; k < threads; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < n; i += threads) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// What one worker produces in a round: its next local state plus the uplink
// message. Either a dense vector replaces g_i, or a compressed increment is
// added to `base` (g_i^t, or g^t for the baseline).
struct LocalOutput {
  WorkerState next;
  bool full = false;
  Vector dense;
  CompressedMsg msg;
  std::uint64_t bits = 0;
};

Vector apply_message(const LocalOutput& out, std::span<const double> base) {
  if (out.full) return out.dense;
  Vector v(base.begin(), base.end());
  axpy(1.0, decompress(out.msg), v);
  return v;
}

LocalOutput full_sync(const WorkerState& w, Vector gradient) {
  LocalOutput out;
  out.next = w;
  out.full = true;
  out.bits = dense_bits(gradient.size());
  out.dense = std::move(gradient);
  out.next.g = out.dense;
  return out;
}

LocalOutput compressed(const WorkerState& w, std::span<const double> base, const CompressorKind& q,
                       std::span<const double> payload, RngStream& rng) {
  LocalOutput out;
  out.next = w;
  out.msg = compress(q, payload, rng);
  out.bits = out.msg.bit_cost;
  out.next.g = apply_message(out, base);
  return out;
}

std::size_t batch_for(const LocalObjective& obj, std::size_t b) {
  // Shards of unequal size: never ask for more samples than the shard holds.
  return std::min(b, num_samples(obj));
}

// Collects protocol aggregands, lets the adversary overwrite the Byzantine
// slots, and aggregates.
void finish_round(ServerState& server, const std::vector<LocalOutput>& outs,
                  const std::vector<Vector>& bases, const Federation& fed, const HyperParams& hp,
                  RngStream agg_rng) {
  const std::size_t n = fed.n();
  std::vector<Vector> reconstructed(n);
  for (std::size_t i = 0; i < n; ++i) reconstructed[i] = apply_message(outs[i], bases[i]);
  AdversaryView view;
  view.honest_aggregands = std::span<const Vector>(reconstructed.data(), fed.num_good);
  view.byz_protocol_aggregands =
      std::span<const Vector>(reconstructed.data() + fed.num_good, fed.num_byz());
  view.num_byz = fed.num_byz();
  auto forged = craft(fed.attack, view);
  for (std::size_t k = 0; k < forged.size(); ++k) reconstructed[fed.num_good + k] = std::move(forged[k]);
  server.per_worker_g = std::move(reconstructed);
  server.g = aggregate(hp.aggregator, server.per_worker_g, agg_rng);
}

void check_state(const AlgorithmState& s, const Federation& fed) {
  if (s.workers.size() != fed.n() || s.server.per_worker_g.size() != fed.n()) {
    throw ArgumentError("state does not match the federation size");
  }
  if (fed.num_good == 0) throw ArgumentError("federation has no honest workers");
  for (const auto& obj : fed.objectives) require_same_dim(dim(obj), s.server.x.size(), "step");
}

std::uint64_t sum_bits(const std::vector<LocalOutput>& outs) {
  std::uint64_t total = 0;
  for (const auto& o : outs) total += o.bits;
  return total;
}

// Shared skeleton of the two MARINA variants. `server_anchor` selects the
// baseline update g_i^{t+1} = g^t + m_i.
StepResult marina_like(const AlgorithmState& s, const Federation& fed, const HyperParams& hp,
                       bool server_anchor) {
  check_state(s, fed);
  const auto& srv = s.server;
  const std::size_t n = fed.n();
  const std::uint64_t t = srv.t;
  StepResult res;
  res.stats.t = t;
  res.stats.coin = sync_coin(hp.seed, t, hp.p);
  Vector x_next = srv.x;
  axpy(-hp.gamma, srv.g, x_next);

  std::vector<Vector> bases(n);
  for (std::size_t i = 0; i < n; ++i) bases[i] = server_anchor ? srv.g : s.workers[i].g;

  std::vector<LocalOutput> outs(n);
  for_each_worker(n, [&](std::size_t i) {
    const auto& obj = fed.objectives[i];
    if (res.stats.coin) {
      outs[i] = full_sync(s.workers[i], grad(obj, x_next));
      return;
    }
    RngStream sample_rng = worker_stream(hp.seed, i, t, kPurposeSample);
    RngStream comp_rng = worker_stream(hp.seed, i, t, kPurposeCompress);
    const Vector diff = grad_diff_estimator(obj, x_next, srv.x, batch_for(obj, hp.b), sample_rng);
    outs[i] = compressed(s.workers[i], bases[i], hp.uplink, diff, comp_rng);
  });

  res.state.server.x = std::move(x_next);
  res.state.server.w = srv.w;
  res.state.server.t = t + 1;
  finish_round(res.state.server, outs, bases, fed, hp,
               root_stream(hp.seed).substream(kAggregateStream, t));
  res.state.workers.reserve(n);
  for (auto& o : outs) res.state.workers.push_back(std::move(o.next));
  res.stats.uplink_bits = sum_bits(outs);
  res.stats.downlink_bits = dense_bits(srv.x.size());
  return res;
}

}  // namespace

bool sync_coin(std::uint64_t seed, std::uint64_t t, double p) {
  RngStream rng = root_stream(seed).substream(kCoinStream, t);
  return rng.bernoulli(p);
}

AlgorithmState initialize(Method method, const Federation& fed, std::span<const double> x0,
                          const HyperParams& hp) {
  if (fed.num_good == 0 || fed.num_good > fed.n()) {
    throw ArgumentError("federation needs 1 <= num_good <= n");
  }
  const std::size_t n = fed.n();
  for (const auto& obj : fed.objectives) require_same_dim(dim(obj), x0.size(), "initialize");
  AlgorithmState s;
  s.server.x.assign(x0.begin(), x0.end());
  s.server.w = s.server.x;
  s.server.t = 0;
  s.workers.resize(n);
  for_each_worker(n, [&](std::size_t i) {
    auto& w = s.workers[i];
    w.g = grad(fed.objectives[i], x0);
    if (method == Method::DashaPage) w.h = w.g;
    if (method == Method::EF21BC) w.w = s.server.w;
  });
  std::vector<Vector> slots(n);
  for (std::size_t i = 0; i < n; ++i) slots[i] = s.workers[i].g;
  AdversaryView view;
  view.honest_aggregands = std::span<const Vector>(slots.data(), fed.num_good);
  view.byz_protocol_aggregands = std::span<const Vector>(slots.data() + fed.num_good, fed.num_byz());
  view.num_byz = fed.num_byz();
  auto forged = craft(fed.attack, view);
  for (std::size_t k = 0; k < forged.size(); ++k) slots[fed.num_good + k] = std::move(forged[k]);
  s.server.per_worker_g = std::move(slots);
  RngStream agg_rng = root_stream(hp.seed).substream(kInitAggregateStream);
  s.server.g = aggregate(hp.aggregator, s.server.per_worker_g, agg_rng);
  return s;
}

StepResult step_byz_vr_marina(const AlgorithmState& s, const Federation& fed, const HyperParams& hp) {
  return marina_like(s, fed, hp, /*server_anchor=*/true);
}

StepResult step_byz_vr_marina2(const AlgorithmState& s, const Federation& fed, const HyperParams& hp) {
  return marina_like(s, fed, hp, /*server_anchor=*/false);
}

StepResult step_byz_dasha_page(const AlgorithmState& s, const Federation& fed, const HyperParams& hp) {
  check_state(s, fed);
  const auto& srv = s.server;
  const std::size_t n = fed.n();
  const std::uint64_t t = srv.t;
  StepResult res;
  res.stats.t = t;
  res.stats.coin = sync_coin(hp.seed, t, hp.p);
  Vector x_next = srv.x;
  axpy(-hp.gamma, srv.g, x_next);

  std::vector<Vector> bases(n);
  for (std::size_t i = 0; i < n; ++i) bases[i] = s.workers[i].g;

  std::vector<LocalOutput> outs(n);
  for_each_worker(n, [&](std::size_t i) {
    const auto& obj = fed.objectives[i];
    const auto& w = s.workers[i];
    Vector h_next;
    if (res.stats.coin) {
      h_next = grad(obj, x_next);
    } else {
      RngStream sample_rng = worker_stream(hp.seed, i, t, kPurposeSample);
      h_next = w.h;
      axpy(1.0, grad_diff_estimator(obj, x_next, srv.x, batch_for(obj, hp.b), sample_rng), h_next);
    }
    // h^{t+1} - h^t - a (g^t - h^t)
    Vector payload(h_next.size());
    for (std::size_t j = 0; j < payload.size(); ++j) {
      payload[j] = (h_next[j] - w.h[j]) - hp.a * (w.g[j] - w.h[j]);
    }
    RngStream comp_rng = worker_stream(hp.seed, i, t, kPurposeCompress);
    outs[i] = compressed(w, bases[i], hp.uplink, payload, comp_rng);
    outs[i].next.h = std::move(h_next);
  });

  res.state.server.x = std::move(x_next);
  res.state.server.w = srv.w;
  res.state.server.t = t + 1;
  finish_round(res.state.server, outs, bases, fed, hp,
               root_stream(hp.seed).substream(kAggregateStream, t));
  res.state.workers.reserve(n);
  for (auto& o : outs) res.state.workers.push_back(std::move(o.next));
  res.stats.uplink_bits = sum_bits(outs);
  res.stats.downlink_bits = dense_bits(srv.x.size());
  return res;
}

namespace {

StepResult ef21_like(const AlgorithmState& s, const Federation& fed, const HyperParams& hp,
                     bool compress_downlink) {
  check_state(s, fed);
  const auto& srv = s.server;
  const std::size_t n = fed.n();
  const std::uint64_t t = srv.t;
  StepResult res;
  res.stats.t = t;
  Vector x_next = srv.x;
  axpy(-hp.gamma, srv.g, x_next);

  // Point at which workers evaluate gradients, and the broadcast increment.
  std::optional<Vector> shift;
  if (compress_downlink) {
    RngStream down_rng = root_stream(hp.seed).substream(kDownlinkStream, t);
    const CompressedMsg s_msg = compress(hp.downlink, sub(x_next, srv.w), down_rng);
    shift = decompress(s_msg);
    res.stats.downlink_bits = s_msg.bit_cost;
    res.state.server.w = srv.w;
    axpy(1.0, *shift, res.state.server.w);
  } else {
    res.stats.downlink_bits = dense_bits(srv.x.size());
    res.state.server.w = srv.w;
  }

  std::vector<Vector> bases(n);
  for (std::size_t i = 0; i < n; ++i) bases[i] = s.workers[i].g;

  std::vector<LocalOutput> outs(n);
  for_each_worker(n, [&](std::size_t i) {
    const auto& w = s.workers[i];
    Vector w_next;
    const Vector* point = &x_next;
    if (shift) {
      w_next = w.w;
      axpy(1.0, *shift, w_next);
      point = &w_next;
    }
    const Vector gi = grad(fed.objectives[i], *point);
    RngStream comp_rng = worker_stream(hp.seed, i, t, kPurposeCompress);
    outs[i] = compressed(w, bases[i], hp.uplink, sub(gi, w.g), comp_rng);
    if (shift) outs[i].next.w = std::move(w_next);
  });

  res.state.server.x = std::move(x_next);
  res.state.server.t = t + 1;
  finish_round(res.state.server, outs, bases, fed, hp,
               root_stream(hp.seed).substream(kAggregateStream, t));
  res.state.workers.reserve(n);
  for (auto& o : outs) res.state.workers.push_back(std::move(o.next));
  res.stats.uplink_bits = sum_bits(outs);
  return res;
}

}  // namespace

StepResult step_byz_ef21(const AlgorithmState& s, const Federation& fed, const HyperParams& hp) {
  return ef21_like(s, fed, hp, false);
}

StepResult step_byz_ef21_bc(const AlgorithmState& s, const Federation& fed, const HyperParams& hp) {
  return ef21_like(s, fed, hp, true);
}

StepResult step(Method method, const AlgorithmState& s, const Federation& fed, const HyperParams& hp) {
  switch (method) {
    case Method::Marina: return step_byz_vr_marina(s, fed, hp);
    case Method::Marina2: return step_byz_vr_marina2(s, fed, hp);
    case Method::DashaPage: return step_byz_dasha_page(s, fed, hp);
    case Method::EF21: return step_byz_ef21(s, fed, hp);
    case Method::EF21BC: return step_byz_ef21_bc(s, fed, hp);
  }
  throw ArgumentError("unknown method");
}

}  // namespace byzsim
