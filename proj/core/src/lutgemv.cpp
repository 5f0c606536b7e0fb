#include "sail/lutgemv.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "sail/cost.hpp"
#include "sail/quant.hpp"

namespace sail {

namespace {

unsigned ceil_log2(std::uint64_t x) {
  return x <= 1 ? 0u : static_cast<unsigned>(std::bit_width(x - 1));
}

void check_nbw(unsigned nbw) {
  if (nbw < 1 || nbw > kMaxNbw)
    throw std::invalid_argument("nbw must be in 1.." + std::to_string(kMaxNbw) + ", got " +
                                std::to_string(nbw));
}

}  // namespace

std::size_t max_bit_width(std::size_t rows, unsigned nbw) {
  if (nbw >= 8 * sizeof(std::size_t)) return 0;
  return rows >> nbw;
}

unsigned lut_entry_width(unsigned weight_bits, unsigned nbw) {
  return weight_bits + ceil_log2(nbw) + 1;
}

void check_lut_capacity(std::size_t entry_width, unsigned nbw, std::size_t rows) {
  if (entry_width == 0 || entry_width > max_bit_width(rows, nbw))
    throw CapacityError("LUT capacity: " + std::to_string(1u << nbw) + " entries of " +
                        std::to_string(entry_width) + " bits exceed " + std::to_string(rows) +
                        " rows (max entry width " + std::to_string(max_bit_width(rows, nbw)) + ")");
}

std::uint64_t lut_build_add_cycles(unsigned weight_bits, unsigned nbw) {
  check_nbw(nbw);
  std::uint64_t cycles = 0;
  for (unsigned m = 1; m < (1u << nbw); ++m) {
    const unsigned p = static_cast<unsigned>(std::popcount(m));
    if (p < 2) continue;
    cycles += cost::add_cycles(weight_bits + ceil_log2(p - 1));
  }
  return cycles;
}

std::uint64_t lookup_step_cycles(const LutCostModel& model) {
  return model.lookup_cycles + cost::add_cycles(model.accumulator_width);
}

GroupCost group_cost(unsigned weight_bits, unsigned act_bits, unsigned nbw,
                     const LutCostModel& model) {
  GroupCost g;
  g.build = model.slice_access_cycles + lut_build_add_cycles(weight_bits, nbw);
  g.transpose = static_cast<std::uint64_t>(nbw) * cost::transpose_cycles(weight_bits);
  g.lookup_per_row = static_cast<std::uint64_t>(act_bits) * lookup_step_cycles(model);
  g.prt_hit_per_row = model.prt_merge_cycles;
  return g;
}

std::uint64_t prt_per_hit_saving(unsigned act_bits, const LutCostModel& model) {
  const auto g = group_cost(2, act_bits, 1, model);
  return g.lookup_per_row - g.prt_hit_per_row;
}

void fill_subset_sums(const std::int32_t* basis, unsigned nbw, std::int32_t* out) {
  out[0] = 0;
  for (unsigned m = 1; m < (1u << nbw); ++m) {
    const unsigned low = static_cast<unsigned>(std::countr_zero(m));
    out[m] = out[m & (m - 1)] + basis[nbw - 1 - low];
  }
}

LutTable build_lut(std::span<const std::int32_t> basis_weights, unsigned weight_bits,
                   std::size_t rows, CycleLedger* ledger) {
  const unsigned nbw = static_cast<unsigned>(basis_weights.size());
  check_nbw(nbw);
  if (weight_bits < 1 || weight_bits > 16) throw std::invalid_argument("build_lut: weight_bits out of range");
  const std::int32_t lo = -(std::int32_t{1} << (weight_bits - 1));
  const std::int32_t hi = (std::int32_t{1} << (weight_bits - 1)) - 1;
  for (auto w : basis_weights)
    if (w < lo || w > hi)
      throw std::invalid_argument("build_lut: weight " + std::to_string(w) + " outside " +
                                  std::to_string(weight_bits) + "-bit signed range");
  LutTable t;
  t.nbw = nbw;
  t.weight_bits = weight_bits;
  t.entry_width = lut_entry_width(weight_bits, nbw);
  check_lut_capacity(t.entry_width, nbw, rows);
  t.entries.resize(std::size_t{1} << nbw);
  fill_subset_sums(basis_weights.data(), nbw, t.entries.data());
  if (ledger) ledger->charge(CycleCategory::LutBuild, lut_build_add_cycles(weight_bits, nbw));
  return t;
}

std::int32_t lookup_accumulate(const LutTable& table, unsigned pattern, unsigned bit_pos,
                               std::int32_t acc, CycleLedger* ledger, const LutCostModel& model) {
  if (pattern >= table.size()) throw std::out_of_range("lookup_accumulate: pattern out of range");
  if (ledger) ledger->charge(CycleCategory::LookupAccumulate, lookup_step_cycles(model));
  const std::int64_t shifted = static_cast<std::int64_t>(table[pattern]) * (std::int64_t{1} << bit_pos);
  return static_cast<std::int32_t>(acc + shifted);
}

void validate(const GemvJob& job, const LutCostModel& model) {
  check_nbw(job.nbw);
  check_bit_width(job.weight_bits);
  if (job.act_bits < 1 || job.act_bits > 8)
    throw std::invalid_argument("act_bits must be in 1..8");
  if (job.batch == 0 || job.k == 0 || job.n == 0) throw std::invalid_argument("GemvJob: empty shape");
  if (job.activations.size() != job.batch * job.k)
    throw std::invalid_argument("GemvJob: activations must be batch x k");
  if (job.weights.size() != job.k * job.n) throw std::invalid_argument("GemvJob: weights must be k x n");
  check_lut_capacity(lut_entry_width(job.weight_bits, job.nbw), job.nbw, model.array_rows);

  const std::int32_t act_max = (1 << job.act_bits) - 1;
  for (auto a : job.activations)
    if (a > act_max) throw std::invalid_argument("GemvJob: activation code exceeds act_bits");
  const std::int32_t w_lo = min_code(job.weight_bits, Signedness::Signed);
  const std::int32_t w_hi = max_code(job.weight_bits, Signedness::Signed);
  for (auto w : job.weights)
    if (w < w_lo || w > w_hi) throw std::invalid_argument("GemvJob: weight code exceeds weight_bits");

  const std::uint64_t per_term = (std::uint64_t{1} << (job.weight_bits - 1)) * static_cast<std::uint64_t>(act_max);
  const unsigned acc_w = model.accumulator_width;
  if (acc_w < 2 || acc_w > 32 || job.k > ((std::uint64_t{1} << (acc_w - 1)) - 1) / per_term)
    throw std::invalid_argument("GemvJob: worst-case sum overflows the accumulator");
}

GemvResult gemv_tile(const GemvJob& job, PatternReuseTable* prt, const LutCostModel& model) {
  validate(job, model);
  const std::size_t B = job.batch, K = job.k, N = job.n;
  const unsigned nbw = job.nbw;
  const unsigned ab = job.act_bits;
  const std::size_t E = std::size_t{1} << nbw;
  const std::size_t groups = (K + nbw - 1) / nbw;
  const GroupCost gc = group_cost(job.weight_bits, ab, nbw, model);

  GemvResult res;
  res.acc.assign(B * N, 0);
  res.groups = groups;
  if (prt) prt->set_per_hit_saving(gc.lookup_per_row - gc.prt_hit_per_row);

  std::vector<std::int32_t> tables(N * E);
  std::vector<std::int32_t> partial(N);
  std::int32_t basis[kMaxNbw];
  std::uint32_t x[kMaxNbw];
  unsigned patterns[8];

  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t k0 = g * nbw;
    const std::size_t rows_here = std::min<std::size_t>(nbw, K - k0);
    for (std::size_t col = 0; col < N; ++col) {
      for (unsigned j = 0; j < nbw; ++j)
        basis[j] = j < rows_here ? job.weights[(k0 + j) * N + col] : 0;
      fill_subset_sums(basis, nbw, tables.data() + col * E);
    }
    res.ledger.charge(CycleCategory::LutBuild, gc.build);
    res.ledger.charge(CycleCategory::Transpose, gc.transpose);
    if (prt) prt->invalidate_generation();

    for (std::size_t b = 0; b < B; ++b) {
      std::uint32_t key = 0;
      for (unsigned j = 0; j < nbw; ++j) {
        x[j] = j < rows_here ? job.activations[b * K + k0 + j] : 0;
        key |= x[j] << (j * ab);
      }
      std::int32_t* acc_row = res.acc.data() + b * N;

      if (prt) {
        if (const auto* cached = prt->lookup(key)) {
          for (std::size_t col = 0; col < N; ++col) acc_row[col] += (*cached)[col];
          res.ledger.charge(CycleCategory::LookupAccumulate, gc.prt_hit_per_row);
          ++res.prt_hits;
          continue;
        }
      }

      // One pattern per activation bit, LSB first; bit (nbw-1) of a pattern
      // comes from the group's first activation.
      for (unsigned bit = 0; bit < ab; ++bit) {
        unsigned p = 0;
        for (unsigned j = 0; j < nbw; ++j) p |= ((x[j] >> bit) & 1u) << (nbw - 1 - j);
        patterns[bit] = p;
      }
      for (std::size_t col = 0; col < N; ++col) {
        const std::int32_t* t = tables.data() + col * E;
        std::int32_t s = 0;
        for (unsigned bit = 0; bit < ab; ++bit)
          s += static_cast<std::int32_t>(static_cast<std::uint32_t>(t[patterns[bit]]) << bit);
        partial[col] = s;
        acc_row[col] += s;
      }
      res.ledger.charge(CycleCategory::LookupAccumulate, gc.lookup_per_row);
      res.lookup_steps += ab;
      if (prt) prt->insert(key, partial);
    }
  }

  const std::size_t arrays = (N + model.array_cols - 1) / model.array_cols;
  res.ledger.charge(CycleCategory::Aggregate,
                    B * ceil_log2(arrays) * model.aggregation_cycles_per_level);
  return res;
}

double lut_overhead_fraction(const CycleLedger& ledger) {
  const auto total = ledger.total();
  if (total == 0) throw std::invalid_argument("lut_overhead_fraction: empty ledger");
  return static_cast<double>(ledger[CycleCategory::LutBuild]) / static_cast<double>(total);
}

}  // namespace sail
