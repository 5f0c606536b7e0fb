#include "sail/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>

#include "sail/arch.hpp"
#include "sail/cost.hpp"
#include "sail/quant.hpp"
#include "sail/typeconv.hpp"

namespace sail {

namespace {

unsigned ceil_log2(std::uint64_t x) {
  return x <= 1 ? 0u : static_cast<unsigned>(std::bit_width(x - 1));
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::uint64_t to_cycles(double x) { return static_cast<std::uint64_t>(std::ceil(x)); }

}  // namespace

// --- configuration ------------------------------------------------------------

double PipelineConfig::load_bytes_per_second() const {
  return std::min(dram_bandwidth, noc_bytes_per_cycle * noc_clock_hz);
}

std::size_t PipelineConfig::tiles_per_wave() const {
  return std::max<std::size_t>(1, llc_slices / 2 / std::max<std::size_t>(1, arrays_per_tile()));
}

void validate(const PipelineConfig& c) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0)) throw std::invalid_argument(std::string("PipelineConfig: ") + what + " must be positive");
  };
  positive(c.core_clock_hz, "core_clock");
  positive(c.noc_bytes_per_cycle, "noc bytes per cycle");
  positive(c.noc_clock_hz, "noc clock");
  positive(c.dram_bandwidth, "dram bandwidth");
  positive(static_cast<double>(c.llc_capacity), "llc capacity");
  positive(static_cast<double>(c.llc_slices), "llc slices");
  if (c.dequant_cycles_per_element < 0) throw std::invalid_argument("PipelineConfig: negative dequant cost");
  if (c.batch < 1) throw std::invalid_argument("PipelineConfig: batch must be >= 1");
  if (c.nbw < 1 || c.nbw > kMaxNbw) throw std::invalid_argument("PipelineConfig: nbw must be 1..4");
  check_bit_width(c.weight_bits);
  check_bit_width(c.kv_bits);
  if (c.act_bits < 1 || c.act_bits > 8) throw std::invalid_argument("PipelineConfig: act_bits must be 1..8");
  if (c.array_cols == 0 || c.tile_dim == 0 || c.tile_dim % c.array_cols != 0)
    throw std::invalid_argument("PipelineConfig: tile_dim must be a multiple of array_cols");
  if (c.arrays_per_tile() > c.num_arrays)
    throw std::invalid_argument("PipelineConfig: a tile needs more arrays than exist");
  if (c.kv_lanes == 0 || c.kv_block_len == 0 || c.kv_block_len > c.array_cols || c.kv_lanes > c.num_arrays)
    throw std::invalid_argument("PipelineConfig: bad KV geometry");
}

void validate(const ModelSpec& m) {
  if (m.layers == 0 || m.hidden_size == 0 || m.ffn_dim == 0)
    throw std::invalid_argument("ModelSpec: dimensions must be positive");
  check_bit_width(m.weight_bits);
}

std::optional<ModelSpec> model_preset(const std::string& name) {
  if (name == "toy" || name == "opt-350m") return ModelSpec{name, 24, 1024, 4096, 4096, 4};
  if (name == "llama2-7b") return ModelSpec{name, 32, 4096, 11008, 4096, 4};
  if (name == "llama2-13b") return ModelSpec{name, 40, 5120, 13824, 4096, 4};
  if (name == "llama2-70b") return ModelSpec{name, 80, 8192, 28672, 4096, 4};
  return std::nullopt;
}

std::vector<std::string> model_preset_names() {
  return {"toy", "opt-350m", "llama2-7b", "llama2-13b", "llama2-70b"};
}

// --- schedule -------------------------------------------------------------------

std::uint64_t makespan(std::span<const StageTimes> s) {
  if (s.empty()) return 0;
  std::uint64_t t = s.front().load;
  for (std::size_t i = 1; i < s.size(); ++i) t += std::max(s[i].load, s[i - 1].compute);
  return t + s.back().compute;
}

std::size_t segment_length(std::size_t tile_dim, unsigned weight_bits, unsigned act_bits) {
  std::size_t len = tile_dim;
  while (len > 1 && conversion_width(len, weight_bits, act_bits) > kMaxConvertWidth) len /= 2;
  return len;
}

CycleLedger tile_compute_ledger(const PipelineConfig& cfg, std::size_t batch) {
  const LutCostModel& m = cfg.cost;
  const unsigned nbw = cfg.nbw, wb = cfg.weight_bits, ab = cfg.act_bits;
  check_lut_capacity(lut_entry_width(wb, nbw), nbw, m.array_rows);
  const std::size_t T = cfg.tile_dim;
  const std::size_t seg = segment_length(T, wb, ab);
  const std::size_t segments = T / seg;
  const std::size_t groups = ceil_div(seg, nbw);
  const unsigned n = conversion_width(seg, wb, ab);
  const GroupCost g = group_cost(wb, ab, nbw, m);
  const std::uint64_t B = batch;

  CycleLedger per_seg;
  per_seg.charge(CycleCategory::Other, B * m.accumulator_width);
  per_seg.charge(CycleCategory::LutBuild, groups * g.build);
  per_seg.charge(CycleCategory::Transpose, groups * g.transpose);
  per_seg.charge(CycleCategory::LookupAccumulate, groups * B * g.lookup_per_row);
  per_seg.charge(CycleCategory::Aggregate, B * ceil_log2(cfg.arrays_per_tile()) * m.aggregation_cycles_per_level);
  per_seg.charge(CycleCategory::TypeConvert, B * (cost::twos_to_sm_cycles(n) + cost::int_to_float_cycles(n)));
  per_seg.charge(CycleCategory::Other, B * to_cycles(cfg.dequant_cycles_per_element * static_cast<double>(T)));
  return per_seg.scaled(segments);
}

std::uint64_t tile_bytes(const PipelineConfig& cfg) {
  const std::size_t T = cfg.tile_dim;
  const std::size_t segments = T / segment_length(T, cfg.weight_bits, cfg.act_bits);
  return packed_length(T * T, cfg.weight_bits) + 4ull * T * segments;
}

TokenSchedule tile_schedule(const ModelSpec& model, const PipelineConfig& cfg) {
  validate(model);
  validate(cfg);
  const std::size_t T = cfg.tile_dim;
  const std::uint64_t bytes = tile_bytes(cfg);
  if (bytes > cfg.llc_capacity / 2)
    throw CapacityError("tile of " + std::to_string(bytes) + " bytes exceeds half the LLC");
  const std::size_t per_wave =
      std::min<std::size_t>(cfg.tiles_per_wave(), std::max<std::uint64_t>(1, cfg.llc_capacity / 2 / bytes));

  TokenSchedule out;
  out.tile_ledger = tile_compute_ledger(cfg, cfg.batch);
  const std::uint64_t tile_compute = out.tile_ledger.total();
  const double bpc = cfg.load_bytes_per_cycle();

  const std::size_t h = ceil_div(model.hidden_size, T), f = ceil_div(model.ffn_dim, T);
  struct Phase {
    const char* name;
    std::size_t tiles;
  };
  const Phase phases[] = {{"qkv", 3 * h * h}, {"o", h * h}, {"gate_up", 2 * f * h}, {"down", h * f}};

  CycleLedger compute;
  for (std::size_t layer = 0; layer < model.layers; ++layer) {
    for (const auto& p : phases) {
      for (std::size_t done = 0; done < p.tiles; done += per_wave) {
        Stage s;
        s.layer = layer;
        s.phase = p.name;
        s.tiles = std::min(per_wave, p.tiles - done);
        s.bytes = bytes * s.tiles;
        s.times.load = to_cycles(static_cast<double>(s.bytes) / bpc);
        s.times.compute = tile_compute;
        compute += out.tile_ledger;
        out.tiles += s.tiles;
        out.stages.push_back(std::move(s));
      }
    }
  }
  std::vector<StageTimes> times;
  times.reserve(out.stages.size());
  for (const auto& s : out.stages) times.push_back(s.times);
  out.makespan = makespan(times);
  out.ledger = compute;
  out.ledger.charge(CycleCategory::Load, out.makespan - compute.total());
  return out;
}

double cycles_per_token(const ModelSpec& model, const PipelineConfig& cfg) {
  return static_cast<double>(tile_schedule(model, cfg).makespan) / static_cast<double>(cfg.batch);
}

std::uint64_t kv_attention_cycles(std::size_t context_length, std::size_t hidden, const PipelineConfig& cfg) {
  validate(cfg);
  if (context_length == 0) return 0;
  if (hidden == 0) throw std::invalid_argument("kv_attention_cycles: zero hidden size");
  const LutCostModel& m = cfg.cost;
  const unsigned wb = cfg.kv_bits, ab = cfg.act_bits, nbw = cfg.nbw;
  check_lut_capacity(lut_entry_width(wb, nbw), nbw, m.array_rows);

  // Keys are stored transposed: a block of kv_block_len cached tokens fills
  // the columns of kv_lanes arrays, each holding a slice of the hidden dim.
  const std::size_t rows_per_lane = ceil_div(hidden, cfg.kv_lanes);
  // Long slices return to the CPU in pieces short enough to convert.
  const std::size_t seg = segment_length(rows_per_lane, wb, ab);
  const std::size_t segments = ceil_div(rows_per_lane, seg);
  const std::size_t groups = ceil_div(rows_per_lane, nbw);
  const unsigned n = conversion_width(seg, wb, ab);
  const GroupCost g = group_cost(wb, ab, nbw, m);
  const std::uint64_t round_trip =
      ceil_log2(cfg.kv_lanes) * m.aggregation_cycles_per_level + m.accumulator_width +
      cost::twos_to_sm_cycles(n) + cost::int_to_float_cycles(n) +
      to_cycles(cfg.dequant_cycles_per_element * static_cast<double>(cfg.kv_block_len));
  const std::uint64_t block = groups * (g.build + g.transpose + g.lookup_per_row) + segments * round_trip;
  const std::size_t blocks = ceil_div(context_length, cfg.kv_block_len);
  // Blocks spread over every array of the cluster.
  const double work = static_cast<double>(block) * static_cast<double>(cfg.kv_lanes * blocks);
  return static_cast<std::uint64_t>(std::llround(work / static_cast<double>(cfg.num_arrays)));
}

double tokens_per_second(double cycles_per_token, double core_clock_hz) {
  if (!(cycles_per_token > 0)) throw std::invalid_argument("tokens_per_second: cycles per token must be positive");
  return core_clock_hz / cycles_per_token;
}

double tokens_per_dollar(double rate, double monthly_price) {
  if (!(monthly_price > 0)) throw std::invalid_argument("tokens_per_dollar: price must be positive");
  return rate * kSecondsPerMonth / monthly_price;
}

TokenReport simulate_token(const ModelSpec& model, const PipelineConfig& cfg) {
  TokenReport r;
  r.schedule = tile_schedule(model, cfg);
  r.gemv_cycles_per_token = static_cast<double>(r.schedule.makespan) / static_cast<double>(cfg.batch);
  r.kv_cycles_per_token = model.layers * kv_attention_cycles(model.context_length, model.hidden_size, cfg);
  r.cycles_per_token = r.gemv_cycles_per_token + static_cast<double>(r.kv_cycles_per_token);
  r.kv_fraction = static_cast<double>(r.kv_cycles_per_token) / r.cycles_per_token;
  r.lut_fraction = lut_overhead_fraction(r.schedule.ledger);
  r.tokens_per_second = tokens_per_second(r.cycles_per_token, cfg.core_clock_hz);
  r.tpd = tokens_per_dollar(r.tokens_per_second, cfg.monthly_price);
  return r;
}

// --- sweeps ---------------------------------------------------------------------

std::vector<SweepResult> sweep(const SweepGrid& grid, const ModelSpec& model, const PipelineConfig& base) {
  if (grid.nbw.empty() || grid.weight_bits.empty() || grid.batch.empty())
    throw std::invalid_argument("sweep: empty grid");
  std::vector<SweepResult> out;
  for (auto b : grid.batch)
    for (auto bits : grid.weight_bits)
      for (auto nbw : grid.nbw) {
        SweepResult r;
        r.nbw = nbw;
        r.weight_bits = bits;
        r.batch = b;
        try {
          PipelineConfig c = base;
          c.batch = b;
          c.weight_bits = bits;
          c.nbw = nbw;
          const TokenSchedule s = tile_schedule(model, c);
          r.total_cycles = s.makespan;
          r.cycles_per_token = static_cast<double>(s.makespan) / static_cast<double>(b);
          r.lut_fraction = lut_overhead_fraction(s.ledger);
          r.tokens_per_second = tokens_per_second(r.cycles_per_token, c.core_clock_hz);
          r.tpd = tokens_per_dollar(r.tokens_per_second, c.monthly_price);
        } catch (const std::exception& e) {
          r.status = "capacity_error";
          r.error = e.what();
        }
        out.push_back(std::move(r));
      }
  return out;
}

std::vector<BestNbw> argmin_nbw(std::span<const SweepResult> results) {
  std::map<std::pair<std::size_t, unsigned>, BestNbw> cells;
  for (const auto& r : results) {
    auto [it, fresh] = cells.try_emplace({r.batch, r.weight_bits}, BestNbw{r.batch, r.weight_bits, 0, 0});
    BestNbw& best = it->second;
    if (!r.ok()) continue;
    if (best.nbw == 0 || r.cycles_per_token < best.cycles_per_token) {
      best.nbw = r.nbw;
      best.cycles_per_token = r.cycles_per_token;
    }
  }
  std::vector<BestNbw> out;
  for (auto& [key, best] : cells) out.push_back(best);
  return out;
}

void write_sweep_csv(std::ostream& os, std::span<const SweepResult> results) {
  os << "nbw,weight_bits,batch,total_cycles,cycles_per_token,lut_fraction,tokens_per_second,tpd,status\n";
  os << std::setprecision(10);
  for (const auto& r : results)
    os << r.nbw << ',' << r.weight_bits << ',' << r.batch << ',' << r.total_cycles << ',' << r.cycles_per_token
       << ',' << r.lut_fraction << ',' << r.tokens_per_second << ',' << r.tpd << ',' << r.status << '\n';
}

void write_plot_csv(std::ostream& os, std::span<const SweepResult> results) {
  std::set<std::pair<unsigned, unsigned>> series;  // (nbw, bits)
  std::map<std::size_t, std::map<std::pair<unsigned, unsigned>, const SweepResult*>> rows;
  for (const auto& r : results) {
    series.insert({r.nbw, r.weight_bits});
    rows[r.batch][{r.nbw, r.weight_bits}] = &r;
  }
  os << "batch";
  for (auto [nbw, bits] : series) os << ",nbw" << nbw << "_q" << bits;
  os << '\n' << std::setprecision(10);
  for (const auto& [batch, cells] : rows) {
    os << batch;
    for (const auto& key : series) {
      os << ',';
      auto it = cells.find(key);
      if (it != cells.end() && it->second->ok()) os << it->second->cycles_per_token;
    }
    os << '\n';
  }
}

}  // namespace sail
