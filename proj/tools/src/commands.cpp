#include "sail_cli/commands.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "sail/arch.hpp"
#include "sail/bitplane.hpp"
#include "sail/cost.hpp"
#include "sail/pipeline.hpp"
#include "sail/prt.hpp"
#include "sail/quant.hpp"
#include "sail/sailt.hpp"
#include "sail/typeconv.hpp"

namespace sail::cli {

using nlohmann::json;

// --- oracles ----------------------------------------------------------------

std::vector<std::int64_t> oracle_gemv(const GemvJob& job) {
  std::vector<std::int64_t> out(job.batch * job.n, 0);
  for (std::size_t b = 0; b < job.batch; ++b)
    for (std::size_t n = 0; n < job.n; ++n) {
      std::int64_t s = 0;
      for (std::size_t k = 0; k < job.k; ++k)
        s += static_cast<std::int64_t>(job.activations[b * job.k + k]) * job.weights[k * job.n + n];
      out[b * job.n + n] = s;
    }
  return out;
}

std::uint32_t reference_int_to_float(bool sign, std::uint32_t magnitude) {
  if (magnitude == 0) return 0;
  const float v = static_cast<float>(magnitude);
  return std::bit_cast<std::uint32_t>(sign ? -v : v);
}

GemvJob random_gemv_case(std::mt19937_64& rng, unsigned act_bits) {
  static constexpr unsigned kBits[] = {2, 3, 4, 5, 6, 8};
  static constexpr std::size_t kShapes[][2] = {{8, 8}, {64, 64}, {1024, 1024}};
  static constexpr std::size_t kBatches[] = {1, 2, 4, 8};
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  GemvJob job;
  job.weight_bits = kBits[pick(6)];
  job.nbw = static_cast<unsigned>(1 + pick(4));
  const auto& shape = kShapes[pick(3)];
  job.k = shape[0];
  job.n = shape[1];
  job.batch = kBatches[pick(4)];
  job.act_bits = act_bits;

  const std::int32_t w_lo = min_code(job.weight_bits, Signedness::Signed);
  const std::int32_t w_hi = max_code(job.weight_bits, Signedness::Signed);
  std::uniform_int_distribution<std::int32_t> wdist(w_lo, w_hi);
  std::uniform_int_distribution<std::uint32_t> xdist(0, (1u << act_bits) - 1);
  job.weights.resize(job.k * job.n);
  for (auto& w : job.weights) w = static_cast<std::int8_t>(wdist(rng));

  // Half of the cases draw their rows from two prototypes so that the PRT
  // sees repeated groups.
  const bool repeated = pick(2) == 1;
  std::vector<std::uint8_t> protos(2 * job.k);
  for (auto& x : protos) x = static_cast<std::uint8_t>(xdist(rng));
  job.activations.resize(job.batch * job.k);
  for (std::size_t b = 0; b < job.batch; ++b) {
    const std::size_t p = pick(2);
    for (std::size_t k = 0; k < job.k; ++k)
      job.activations[b * job.k + k] = repeated ? protos[p * job.k + k] : static_cast<std::uint8_t>(xdist(rng));
  }
  return job;
}

namespace {

json job_json(const GemvJob& j) {
  return {{"batch", j.batch}, {"k", j.k}, {"n", j.n}, {"weight_bits", j.weight_bits},
          {"act_bits", j.act_bits}, {"nbw", j.nbw}};
}

json prt_json(const PrtStats& s) {
  return {{"hits", s.hits},           {"misses", s.misses},       {"inserts", s.inserts},
          {"evictions", s.evictions}, {"collisions", s.collisions}, {"cycles_saved", s.cycles_saved},
          {"hit_rate", s.hit_rate()}};
}

}  // namespace

// --- check-gemv ---------------------------------------------------------------

CommandResult cmd_check_gemv(const RunConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  json first = nullptr;
  std::size_t failures = 0, prt_mismatches = 0, accounting_errors = 0;
  std::uint64_t prt_hits = 0;
  std::map<std::string, std::size_t> coverage;

  for (std::size_t i = 0; i < cfg.cases; ++i) {
    const GemvJob job = random_gemv_case(rng, cfg.act_bits);
    ++coverage["w" + std::to_string(job.weight_bits) + "_nbw" + std::to_string(job.nbw)];
    const auto expect = oracle_gemv(job);
    const GemvResult plain = gemv_tile(job);
    GemvResult got = plain;
    if (cfg.inject_fault == "gemv" && i == 0) got.acc[0] ^= 1;

    bool bad = false;
    for (std::size_t e = 0; e < expect.size() && !bad; ++e) {
      if (expect[e] == got.acc[e]) continue;
      bad = true;
      if (first.is_null())
        first = {{"case", i},           {"job", job_json(job)},   {"row", e / job.n},
                 {"col", e % job.n},    {"expected", expect[e]}, {"got", got.acc[e]}};
    }
    failures += bad;

    if (cfg.prt) {
      PatternReuseTable prt;
      const GemvResult with = gemv_tile(job, &prt);
      if (with.acc != plain.acc) ++prt_mismatches;
      prt_hits += with.prt_hits;
      if (plain.ledger.total() - with.ledger.total() != prt.stats().hits * prt.per_hit_saving() ||
          prt.stats().cycles_saved != prt.stats().hits * prt.per_hit_saving())
        ++accounting_errors;
    }
  }

  CommandResult r;
  r.report = {{"command", "check-gemv"},
              {"config", to_json(cfg)},
              {"seed", cfg.seed},
              {"cases", cfg.cases},
              {"failures", failures},
              {"first_counterexample", first},
              {"prt", {{"enabled", cfg.prt},
                       {"mismatches", prt_mismatches},
                       {"accounting_errors", accounting_errors},
                       {"hits", prt_hits}}},
              {"coverage", coverage}};
  const bool ok = failures == 0 && prt_mismatches == 0 && accounting_errors == 0;
  r.report["status"] = ok ? "pass" : "fail";
  r.exit_code = ok ? kExitOk : kExitVerificationFailure;
  return r;
}

// --- check-typeconv -------------------------------------------------------------

namespace {

struct WidthAudit {
  unsigned n = 0;
  std::size_t samples = 0;
  std::size_t mismatches = 0;
  std::uint64_t charged = 0;
  std::uint64_t logical_ops = 0;
  json first = nullptr;
};

// Converts values[i] = (sign, magnitude) in batches of one array's width.
WidthAudit convert_width(unsigned n, const std::vector<std::pair<bool, std::uint32_t>>& values, bool fault) {
  WidthAudit a;
  a.n = n;
  a.samples = values.size();
  BitPlaneArray arr;
  const std::size_t cols = arr.cols();
  for (std::size_t base = 0; base < values.size(); base += cols) {
    const std::size_t count = std::min(cols, values.size() - base);
    for (std::size_t c = 0; c < cols; ++c) {
      std::uint64_t v = 0;
      if (c < count) {
        const auto [s, m] = values[base + c];
        v = m | (static_cast<std::uint64_t>(s) << (n - 1));
      }
      arr.poke_column(c, 0, n, v);
    }
    const auto rep = int_to_float_inmem(arr, 0, n, 32, 64);
    a.charged = rep.charged_cycles;
    a.logical_ops = std::max(a.logical_ops, rep.logical_ops);
    for (std::size_t c = 0; c < count; ++c) {
      const auto [s, m] = values[base + c];
      auto got = static_cast<std::uint32_t>(arr.read_column(c, 32, 32));
      if (fault && base == 0 && c == 0) got ^= 1u;
      const std::uint32_t want = reference_int_to_float(s, m);
      if (got == want) continue;
      ++a.mismatches;
      if (a.first.is_null())
        a.first = {{"n", n}, {"sign", s}, {"magnitude", m}, {"expected", want}, {"got", got}};
    }
  }
  return a;
}

}  // namespace

CommandResult cmd_check_typeconv(const RunConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  json table = json::array();
  json first = nullptr;
  bool ok = true;
  for (unsigned n = kMinConvertWidth; n <= kMaxConvertWidth; ++n) {
    const std::uint32_t mag_max = (1u << (n - 1)) - 1;
    std::vector<std::pair<bool, std::uint32_t>> values;
    const bool exhaustive = n <= 13;
    if (exhaustive) {
      for (std::uint32_t m = 0; m <= mag_max; ++m) {
        values.emplace_back(false, m);
        values.emplace_back(true, m);
      }
    } else {
      for (bool s : {false, true})
        for (std::uint32_t m : {0u, 1u, 1u << (n - 2), mag_max}) values.emplace_back(s, m);
      std::uniform_int_distribution<std::uint32_t> mdist(0, mag_max);
      for (std::size_t i = 0; i < cfg.typeconv_samples; ++i) values.emplace_back(rng() & 1u, mdist(rng));
    }
    const bool fault = cfg.inject_fault == "typeconv" && n == kMinConvertWidth;
    const WidthAudit a = convert_width(n, values, fault);
    const std::uint64_t formula = cost::int_to_float_cycles(n);
    const double ratio = static_cast<double>(a.logical_ops) / static_cast<double>(formula);
    const bool row_ok = a.mismatches == 0 && a.charged == formula && ratio <= 1.25;
    ok = ok && row_ok;
    if (first.is_null() && !a.first.is_null()) first = a.first;
    table.push_back({{"n", n},
                     {"mode", exhaustive ? "exhaustive" : "random"},
                     {"samples", a.samples},
                     {"mismatches", a.mismatches},
                     {"charged_cycles", a.charged},
                     {"formula_cycles", formula},
                     {"logical_ops", a.logical_ops},
                     {"ops_over_formula", ratio},
                     {"pass", row_ok}});
  }
  CommandResult r;
  r.report = {{"command", "check-typeconv"},
              {"config", to_json(cfg)},
              {"seed", cfg.seed},
              {"audit", table},
              {"first_counterexample", first},
              {"status", ok ? "pass" : "fail"}};
  r.exit_code = ok ? kExitOk : kExitVerificationFailure;
  return r;
}

// --- simulate -------------------------------------------------------------------

namespace {

std::vector<float> random_values(std::mt19937_64& rng, std::size_t count, bool heavy_tail) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::exponential_distribution<float> expo(4.0f);
  std::vector<float> v(count);
  for (auto& x : v) {
    if (!heavy_tail) {
      x = normal(rng);
    } else {
      // Mostly small magnitudes with a few outliers, like hidden states.
      const float m = expo(rng);
      x = (rng() & 1u) ? m : -m;
      if ((rng() & 63u) == 0) x *= 16.0f;
    }
  }
  return v;
}

// Largest batch that fits one array next to its table.
std::size_t fabric_batch(std::size_t want, unsigned wb, unsigned nbw, unsigned n, std::size_t rows) {
  std::size_t b = 0;
  while (b < want && tile_rows_needed(b + 1, wb, nbw, n) <= rows) ++b;
  return b;
}

json run_fabric_tile(const PipelineConfig& p, std::mt19937_64& rng, std::ostream* trace) {
  const std::size_t T = p.tile_dim;
  const unsigned wb = p.weight_bits, ab = p.act_bits, nbw = p.nbw;
  const std::size_t seg = segment_length(T, wb, ab);
  const unsigned n = conversion_width(seg, wb, ab);
  const std::size_t B = fabric_batch(p.batch, wb, nbw, n, p.cost.array_rows);
  if (B == 0) return {{"ran", false}, {"reason", "no batch row fits next to the table"}};

  const auto W = quantize(random_values(rng, T * T, false), T, T, wb, seg, TensorKind::Weight);
  const auto X = quantize(random_values(rng, B * T, true), B, T, ab, seg, TensorKind::Activation);

  MachineState st;
  const std::uint64_t w_addr = 0x10000000, x_addr = 0x20000000, y_addr = 0x30000000;
  st.memory.map(w_addr, encode_sailt(W));
  st.memory.map(x_addr, encode_sailt(X));
  st.memory.map_zero(y_addr, B * T * 4);
  st.regs[1] = w_addr;
  st.regs[2] = x_addr;
  st.regs[3] = y_addr;
  LutmmInstruction in;
  in.rw = 1, in.ri = 2, in.rd = 3, in.ql = wb, in.sc = 0, in.loc = 0;
  const std::uint32_t word = encode(in);

  ClusterConfig cc;
  cc.num_arrays = p.num_arrays;
  cc.array_rows = p.cost.array_rows;
  cc.array_cols = p.array_cols;
  cc.tile_dim = T;
  CSramCluster cluster(cc);
  ExecuteOptions opt;
  opt.nbw = nbw;
  opt.round_trip = seg == T ? RoundTrip::PerTile : RoundTrip::PerQuantGroup;
  opt.cost = p.cost;
  opt.dequant_cycles_per_element = p.dequant_cycles_per_element;
  opt.load_bytes_per_cycle = p.load_bytes_per_cycle();
  opt.trace = trace;
  const ExecutionResult res = execute_instruction(cluster, decode(word), st, opt);

  // Integer partial sums per round trip, then the same float dequantization.
  const auto wc = W.codes();
  const auto xc = X.codes();
  const std::int32_t zp = X.zero_point();
  std::size_t mismatches = 0;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < T; ++c) {
      float y = 0.0f;
      for (std::size_t k0 = 0; k0 < T; k0 += seg) {
        std::int64_t acc = 0, wsum = 0;
        for (std::size_t k = k0; k < k0 + seg; ++k) {
          acc += static_cast<std::int64_t>(wc[c * T + k]) * xc[b * T + k];
          wsum += wc[c * T + k];
        }
        y += dequant_term(W.scale(c, k0), X.scale(b, k0), static_cast<float>(acc), wsum * zp);
      }
      const auto out = st.memory.read(y_addr + 4 * (b * T + c), 4);
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(out[i]) << (8 * i);
      if (bits != std::bit_cast<std::uint32_t>(y)) ++mismatches;
    }

  CycleLedger model = tile_compute_ledger(p, B);
  model.charge(CycleCategory::Load, res.ledger[CycleCategory::Load]);
  return {{"ran", true},
          {"instruction", word},
          {"batch_rows", B},
          {"round_trips", res.round_trips},
          {"group_iterations", res.group_iterations},
          {"conversion_width", res.conversion_width},
          {"tile_bytes", res.tile_bytes},
          {"output_mismatches", mismatches},
          {"output_match", mismatches == 0},
          {"ledger", to_json(res.ledger)},
          {"ledger_matches_model", model == res.ledger}};
}

}  // namespace

CommandResult cmd_simulate(const RunConfig& cfg, std::ostream* trace) {
  const ModelSpec model = resolve_model(cfg);
  const PipelineConfig p = resolve_pipeline(cfg);
  try {
    validate(model);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  std::mt19937_64 rng(cfg.seed);

  const TokenReport tr = simulate_token(model, p);
  const CycleLedger& L = tr.schedule.ledger;
  std::uint64_t sum = 0;
  for (auto c : kAllCycleCategories) sum += L[c];
  const bool ledger_ok = sum == L.total() && L.total() == tr.schedule.makespan;

  // Functional sample of one projection with the PRT on and off.
  GemvJob job;
  job.batch = p.batch;
  job.k = std::min<std::size_t>(model.hidden_size, p.tile_dim);
  job.n = std::min<std::size_t>(model.hidden_size, p.tile_dim);
  job.act_bits = p.act_bits;
  job.weight_bits = p.weight_bits;
  job.nbw = p.nbw;
  {
    const auto W = quantize(random_values(rng, job.n * job.k, false), job.n, job.k, job.weight_bits,
                            kDefaultGroupSize, TensorKind::Weight);
    const auto X = quantize(random_values(rng, job.batch * job.k, true), job.batch, job.k, job.act_bits,
                            kDefaultGroupSize, TensorKind::Activation);
    job.weights.resize(job.k * job.n);
    for (std::size_t k = 0; k < job.k; ++k)
      for (std::size_t c = 0; c < job.n; ++c) job.weights[k * job.n + c] = static_cast<std::int8_t>(W.code(c, k));
    job.activations.resize(job.batch * job.k);
    for (std::size_t b = 0; b < job.batch; ++b)
      for (std::size_t k = 0; k < job.k; ++k)
        job.activations[b * job.k + k] = static_cast<std::uint8_t>(X.code(b, k));
  }
  PatternReuseTable prt;
  const GemvResult off = gemv_tile(job, nullptr, p.cost);
  const GemvResult on = gemv_tile(job, &prt, p.cost);
  const bool identical = on.acc == off.acc;
  const bool oracle_ok = [&] {
    const auto ref = oracle_gemv(job);
    for (std::size_t i = 0; i < ref.size(); ++i)
      if (ref[i] != off.acc[i]) return false;
    return true;
  }();

  const json fabric = run_fabric_tile(p, rng, cfg.trace ? trace : nullptr);
  const bool fabric_ok = !fabric.value("ran", false) ||
                         (fabric.value("output_match", false) && fabric.value("ledger_matches_model", false));

  std::ostringstream csv;
  csv << "layer,phase,tiles,bytes,load_cycles,compute_cycles\n";
  for (const auto& s : tr.schedule.stages)
    csv << s.layer << ',' << s.phase << ',' << s.tiles << ',' << s.bytes << ',' << s.times.load << ','
        << s.times.compute << '\n';

  CommandResult r;
  r.csv = csv.str();
  r.report = {
      {"command", "simulate"},
      {"config", to_json(cfg)},
      {"model", to_json(model)},
      {"batch", p.batch},
      {"nbw", p.nbw},
      {"weight_bits", p.weight_bits},
      {"ledger", to_json(L)},
      {"ledger_consistent", ledger_ok},
      {"tile_ledger", to_json(tr.schedule.tile_ledger)},
      {"tiles", tr.schedule.tiles},
      {"stages", tr.schedule.stages.size()},
      {"makespan", tr.schedule.makespan},
      {"gemv_cycles_per_token", tr.gemv_cycles_per_token},
      {"kv_cycles_per_token", tr.kv_cycles_per_token},
      {"cycles_per_token", tr.cycles_per_token},
      {"kv_fraction", tr.kv_fraction},
      {"lut_fraction", tr.lut_fraction},
      {"tokens_per_second", tr.tokens_per_second},
      {"tpd", tr.tpd},
      {"prt",
       {{"enabled", cfg.prt},
        {"outputs_identical", identical},
        {"cycles_on", on.ledger.total()},
        {"cycles_off", off.ledger.total()},
        {"stats", prt_json(prt.stats())}}},
      {"sample_gemv", {{"job", job_json(job)}, {"oracle_match", oracle_ok},
                       {"ledger", to_json(cfg.prt ? on.ledger : off.ledger)}}},
      {"fabric_tile", fabric},
  };
  const bool ok = ledger_ok && identical && oracle_ok && fabric_ok;
  r.report["status"] = ok ? "pass" : "fail";
  r.exit_code = ok ? kExitOk : kExitVerificationFailure;
  return r;
}

// --- sweep ----------------------------------------------------------------------

CommandResult cmd_sweep(const RunConfig& cfg) {
  const ModelSpec model = resolve_model(cfg);
  const PipelineConfig base = resolve_pipeline(cfg);
  SweepGrid grid;
  grid.nbw = cfg.is_set("nbw") ? cfg.nbw : std::vector<unsigned>{1, 2, 3, 4};
  grid.weight_bits = cfg.is_set("bits") ? cfg.bits : std::vector<unsigned>{2, 3, 4, 5, 6, 8};
  if (cfg.is_set("batch")) {
    grid.batch = cfg.batch;
  } else {
    for (std::size_t b = 1; b <= 32; ++b) grid.batch.push_back(b);
  }
  const auto results = sweep(grid, model, base);

  std::ostringstream csv, plot;
  write_sweep_csv(csv, results);
  write_plot_csv(plot, results);

  json best = json::array();
  for (const auto& b : argmin_nbw(results))
    best.push_back({{"batch", b.batch}, {"weight_bits", b.weight_bits}, {"nbw", b.nbw},
                    {"cycles_per_token", b.cycles_per_token}});
  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.ok();

  auto find = [&](unsigned nbw, unsigned bits, std::size_t batch) -> const SweepResult* {
    for (const auto& r : results)
      if (r.nbw == nbw && r.weight_bits == bits && r.batch == batch && r.ok()) return &r;
    return nullptr;
  };
  json ordering = nullptr;
  if (const auto *a = find(2, 2, 24), *b = find(4, 2, 24), *c = find(4, 4, 24); a && b && c)
    ordering = {{"nbw2_q2", a->cycles_per_token},
                {"nbw4_q2", b->cycles_per_token},
                {"nbw4_q4", c->cycles_per_token},
                {"holds", b->cycles_per_token < c->cycles_per_token && c->cycles_per_token < a->cycles_per_token},
                {"ratio_nbw2_over_nbw4_q2", a->cycles_per_token / b->cycles_per_token}};

  CommandResult r;
  r.csv = csv.str();
  r.plot_csv = plot.str();
  r.report = {{"command", "sweep"},  {"config", to_json(cfg)}, {"model", to_json(model)},
              {"cells", results.size()}, {"failed_cells", failed}, {"argmin_nbw", best},
              {"ordering_batch24", ordering}, {"status", "pass"}};
  return r;
}

}  // namespace sail::cli
