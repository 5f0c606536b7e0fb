#include "sail/arch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <ostream>
#include <string>

#include "sail/cost.hpp"
#include "sail/sailt.hpp"
#include "sail/typeconv.hpp"

namespace sail {

namespace {

constexpr std::array<unsigned, 6> kQlValues = {2, 3, 4, 5, 6, 8};

unsigned ql_index(unsigned ql) {
  for (unsigned i = 0; i < kQlValues.size(); ++i)
    if (kQlValues[i] == ql) return i;
  throw IsaError("ql " + std::to_string(ql) + " is not one of 2, 3, 4, 5, 6, 8");
}

unsigned ceil_log2(std::uint64_t x) {
  return x <= 1 ? 0u : static_cast<unsigned>(std::bit_width(x - 1));
}

}  // namespace

// --- instruction ------------------------------------------------------------

std::uint32_t encode(const LutmmInstruction& in) {
  if (in.sc > kMaxScale) throw IsaError("sc exceeds " + std::to_string(kMaxScale));
  if (in.loc >= (1u << in.sc))
    throw IsaError("loc " + std::to_string(in.loc) + " outside a 2^" + std::to_string(in.sc) +
                   "-tile matrix");
  if (in.loc > kMaxEncodableLoc) throw IsaError("loc does not fit the 4-bit field");
  if (in.rw > 31 || in.ri > 31 || in.rd > 31) throw IsaError("register index exceeds 31");
  const std::uint32_t q = ql_index(in.ql);
  return kLutmmOpcode | (in.rd << 7) | (q << 12) | (in.ri << 15) | (in.rw << 20) |
         (in.sc << 25) | (in.loc << 28);
}

LutmmInstruction decode(std::uint32_t word) {
  if ((word & 0x7Fu) != kLutmmOpcode) throw IsaError("reserved opcode");
  const std::uint32_t q = (word >> 12) & 0x7u;
  if (q >= kQlValues.size()) throw IsaError("reserved ql encoding " + std::to_string(q));
  LutmmInstruction in;
  in.rd = (word >> 7) & 0x1Fu;
  in.ql = kQlValues[q];
  in.ri = (word >> 15) & 0x1Fu;
  in.rw = (word >> 20) & 0x1Fu;
  in.sc = (word >> 25) & 0x7u;
  in.loc = (word >> 28) & 0xFu;
  if (in.loc >= (1u << in.sc)) throw IsaError("loc outside the matrix width");
  return in;
}

ColumnRange tile_columns(std::size_t loc, unsigned sc, std::size_t tile_dim) {
  if (sc > 63 || loc >= (std::size_t{1} << sc))
    throw std::out_of_range("tile_columns: loc " + std::to_string(loc) + " out of range for sc " +
                            std::to_string(sc));
  return {loc * tile_dim, (loc + 1) * tile_dim};
}

// --- hasher -----------------------------------------------------------------

std::size_t hash_address(std::uint64_t addr, const HasherConfig& cfg) {
  if (cfg.num_slices == 0) throw std::invalid_argument("hash_address: zero slices");
  const unsigned width = std::max(1u, static_cast<unsigned>(std::bit_width(cfg.num_slices - 1)));
  const std::uint64_t chunk_mask = (std::uint64_t{1} << width) - 1;
  std::uint64_t block = addr >> cfg.block_bits;
  std::uint64_t folded = 0;
  while (block != 0) {
    folded ^= block & chunk_mask;
    block >>= width;
  }
  return static_cast<std::size_t>(folded % cfg.num_slices);
}

// --- mapping ----------------------------------------------------------------

TileMapping map_tile(std::span<const std::int32_t> tile, std::size_t rows, std::size_t cols,
                     MappingMode mode, std::size_t num_arrays, std::size_t array_cols) {
  if (num_arrays == 0) throw std::invalid_argument("map_tile: no arrays");
  if (tile.size() != rows * cols) throw std::invalid_argument("map_tile: size != rows * cols");
  TileMapping m;
  m.mode = mode;
  m.rows = rows;
  m.cols = cols;
  const std::size_t split = mode == MappingMode::RowSplit ? cols : rows;
  const std::size_t chunk = (split + num_arrays - 1) / num_arrays;
  const std::size_t share_cols = mode == MappingMode::RowSplit ? chunk : cols;
  if (share_cols > array_cols)
    throw GeometryError("map_tile: " + std::to_string(share_cols) + " columns per array exceed " +
                        std::to_string(array_cols));
  for (std::size_t a = 0; a < num_arrays; ++a) {
    ArrayShare s;
    s.array = a;
    const std::size_t lo = std::min(split, a * chunk);
    const std::size_t hi = std::min(split, lo + chunk);
    if (mode == MappingMode::RowSplit) {
      s.row_begin = 0, s.row_end = rows, s.col_begin = lo, s.col_end = hi;
    } else {
      s.row_begin = lo, s.row_end = hi, s.col_begin = 0, s.col_end = cols;
    }
    for (std::size_t r = s.row_begin; r < s.row_end; ++r)
      for (std::size_t c = s.col_begin; c < s.col_end; ++c) s.data.push_back(tile[r * cols + c]);
    m.shares.push_back(std::move(s));
  }
  return m;
}

std::vector<std::int32_t> reassemble(const TileMapping& mapping) {
  std::vector<std::int32_t> out(mapping.rows * mapping.cols, 0);
  for (const auto& s : mapping.shares) {
    std::size_t i = 0;
    for (std::size_t r = s.row_begin; r < s.row_end; ++r)
      for (std::size_t c = s.col_begin; c < s.col_end; ++c) out[r * mapping.cols + c] = s.data[i++];
  }
  return out;
}

// --- memory -----------------------------------------------------------------

void SimMemory::map(std::uint64_t base, std::vector<std::uint8_t> bytes) {
  const std::uint64_t end = base + bytes.size();
  for (const auto& [b, r] : regions_)
    if (base < b + r.size() && b < end) throw std::invalid_argument("SimMemory: overlapping region");
  regions_[base] = std::move(bytes);
}

const std::vector<std::uint8_t>* SimMemory::region(std::uint64_t addr, std::size_t len,
                                                   std::uint64_t& offset) const {
  auto it = regions_.upper_bound(addr);
  if (it == regions_.begin()) return nullptr;
  --it;
  if (addr - it->first > it->second.size() || len > it->second.size() - (addr - it->first)) return nullptr;
  offset = addr - it->first;
  return &it->second;
}

std::span<const std::uint8_t> SimMemory::read(std::uint64_t addr, std::size_t len) const {
  std::uint64_t off = 0;
  const auto* r = region(addr, len, off);
  if (!r) throw UnmappedAddressError("unmapped read at 0x" + std::to_string(addr));
  return {r->data() + off, len};
}

void SimMemory::write(std::uint64_t addr, std::span<const std::uint8_t> bytes) {
  std::uint64_t off = 0;
  const auto* r = region(addr, bytes.size(), off);
  if (!r) throw UnmappedAddressError("unmapped write at 0x" + std::to_string(addr));
  std::memcpy(const_cast<std::uint8_t*>(r->data()) + off, bytes.data(), bytes.size());
}

// --- cluster ----------------------------------------------------------------

CSramCluster::CSramCluster(ClusterConfig cfg) : cfg_(cfg) {
  if (cfg_.num_arrays == 0) throw std::invalid_argument("CSramCluster: no arrays");
  if (cfg_.tile_dim == 0 || cfg_.tile_dim % cfg_.array_cols != 0)
    throw std::invalid_argument("CSramCluster: tile_dim must be a multiple of array_cols");
  if (arrays_per_tile() > cfg_.num_arrays)
    throw std::invalid_argument("CSramCluster: a tile needs more arrays than the cluster has");
  arrays_.reserve(cfg_.num_arrays);
  for (std::size_t i = 0; i < cfg_.num_arrays; ++i) arrays_.emplace_back(cfg_.array_rows, cfg_.array_cols);
}

// --- execution --------------------------------------------------------------

std::size_t round_trip_length(const QuantizedTensor& weights, const QuantizedTensor& inputs,
                              RoundTrip mode) {
  const std::size_t k = weights.cols();
  if (mode == RoundTrip::PerTile) {
    if (weights.group_size() < k || inputs.group_size() < k)
      throw std::invalid_argument(
          "per-tile round trip needs one scale per row over the whole reduction (group_size >= " +
          std::to_string(k) + ")");
    return k;
  }
  const std::size_t gw = std::min(weights.group_size(), k);
  const std::size_t ga = std::min(inputs.group_size(), k);
  const std::size_t lo = std::min(gw, ga), hi = std::max(gw, ga);
  if (hi % lo != 0 || k % lo != 0)
    throw std::invalid_argument("weight and input group sizes must nest and divide the reduction");
  return lo;
}

unsigned conversion_width(std::size_t reduction_length, unsigned weight_bits, unsigned act_bits) {
  const std::uint64_t bound = static_cast<std::uint64_t>(reduction_length) *
                              (std::uint64_t{1} << (weight_bits - 1)) *
                              ((std::uint64_t{1} << act_bits) - 1);
  // Sign-magnitude needs |acc| <= 2^(n-1) - 1.
  return std::max(kMinConvertWidth, static_cast<unsigned>(std::bit_width(bound)) + 1);
}

std::size_t tile_rows_needed(std::size_t batch, unsigned weight_bits, unsigned nbw, unsigned conv_width) {
  const std::size_t lut = (std::size_t{1} << nbw) * lut_entry_width(weight_bits, nbw);
  const std::size_t conv = 32 + int_to_float_scratch_rows(conv_width);
  return batch * 32 + std::max(lut, conv);
}

namespace {

QuantizedTensor load_tensor(const SimMemory& mem, std::uint64_t addr, TensorKind kind) {
  const auto header = mem.read(addr, kSailtHeaderSize);
  const unsigned bits = header[8];
  std::uint32_t dims[3];
  for (int f = 0; f < 3; ++f) {
    dims[f] = 0;
    for (int i = 0; i < 4; ++i) dims[f] |= static_cast<std::uint32_t>(header[9 + 4 * f + i]) << (8 * i);
  }
  if (!is_supported_bit_width(bits) || dims[2] == 0)
    throw SailtFormatError("operand at 0x" + std::to_string(addr) + " is not a SAILT image");
  const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1];
  const std::size_t groups = static_cast<std::size_t>(dims[0]) * ((dims[1] + dims[2] - 1) / dims[2]);
  const std::size_t total = kSailtHeaderSize + packed_length(count, bits) + 4 * groups;
  return decode_sailt(mem.read(addr, total), kind);
}

void trace_line(const ExecuteOptions& opt, const std::string& line) {
  if (opt.trace) *opt.trace << line << '\n';
}

// Row of entry m in the table, and the width it was built at.
struct TableLayout {
  std::size_t base = 0;
  unsigned slot = 0;
  std::vector<unsigned> width;
  std::size_t row(unsigned m) const { return base + static_cast<std::size_t>(m) * slot; }
};

}  // namespace

ExecutionResult execute_instruction(CSramCluster& cluster, const LutmmInstruction& instr,
                                    MachineState& state, const ExecuteOptions& opt) {
  const ClusterConfig& cc = cluster.config();
  const std::size_t T = cc.tile_dim;
  const unsigned nbw = opt.nbw;
  if (nbw < 1 || nbw > kMaxNbw) throw std::invalid_argument("execute_instruction: nbw must be 1..4");
  ql_index(instr.ql);
  const ColumnRange cols = tile_columns(instr.loc, instr.sc, T);

  const std::uint64_t rw = state.regs.at(instr.rw);
  const std::uint64_t ri = state.regs.at(instr.ri);
  const std::uint64_t rd = state.regs.at(instr.rd);
  const QuantizedTensor weights = load_tensor(state.memory, rw, TensorKind::Weight);
  const QuantizedTensor inputs = load_tensor(state.memory, ri, TensorKind::Activation);
  if (weights.bit_width() != instr.ql)
    throw std::invalid_argument("weight image is " + std::to_string(weights.bit_width()) +
                                "-bit but ql = " + std::to_string(instr.ql));
  if (weights.cols() != T || weights.rows() != (T << instr.sc))
    throw std::invalid_argument("weight image must be (tile_dim * 2^sc) x tile_dim");
  if (inputs.cols() != T) throw std::invalid_argument("input image must have tile_dim columns");

  const std::size_t B = inputs.rows();
  const unsigned wb = weights.bit_width();
  const unsigned ab = inputs.bit_width();
  const std::size_t seg_len = round_trip_length(weights, inputs, opt.round_trip);
  const std::size_t segments = T / seg_len;
  const unsigned n_conv = conversion_width(seg_len, wb, ab);
  if (n_conv > kMaxConvertWidth)
    throw CapacityError("partial sums over " + std::to_string(seg_len) +
                        " inputs need " + std::to_string(n_conv) +
                        "-bit conversion; use a shorter round trip");
  const unsigned ew = lut_entry_width(wb, nbw);
  check_lut_capacity(ew, nbw, cc.array_rows);
  if (tile_rows_needed(B, wb, nbw, n_conv) > cc.array_rows)
    throw CapacityError("batch of " + std::to_string(B) + " does not fit one array's rows");
  const std::size_t apt = cluster.arrays_per_tile();
  if (opt.first_array + apt > cluster.size()) throw std::out_of_range("execute_instruction: first_array");

  ExecutionResult res;
  res.batch = B;
  res.conversion_width = n_conv;
  res.round_trips = segments;
  res.output.assign(B * T, 0.0f);

  // Step 1: weight tile from DRAM into the slices picked by the hasher.
  const std::size_t code_bytes_per_row = packed_length(T, wb);  // T codes per output row
  res.tile_bytes = static_cast<std::uint64_t>(code_bytes_per_row) * T;
  const std::uint64_t tile_addr = rw + kSailtHeaderSize + (cols.begin * T * wb) / 8;
  res.slice_blocks.assign(cc.hasher.num_slices, 0);
  const std::uint64_t block = std::uint64_t{1} << cc.hasher.block_bits;
  for (std::uint64_t a = tile_addr & ~(block - 1); a < tile_addr + res.tile_bytes; a += block)
    ++res.slice_blocks[hash_address(a, cc.hasher)];
  const auto load_cycles =
      static_cast<std::uint64_t>(std::ceil(static_cast<double>(res.tile_bytes) / opt.load_bytes_per_cycle));
  res.ledger.charge(CycleCategory::Load, load_cycles);
  trace_line(opt, "step1 load bytes=" + std::to_string(res.tile_bytes) + " cycles=" + std::to_string(load_cycles));

  // Step 2: the DFM fetches the input vectors from the data cache.
  res.ledger.charge(CycleCategory::Load, opt.cost.slice_access_cycles);
  trace_line(opt, "step2 input rows=" + std::to_string(B) + " bits=" + std::to_string(ab));

  const auto w_codes = weights.codes();
  const auto x_codes = inputs.codes();
  const std::int32_t zp = inputs.zero_point();

  TableLayout table;
  table.base = B * 32;
  table.slot = ew;
  table.width.assign(std::size_t{1} << nbw, 0);
  const std::size_t conv_dst = table.base;
  const std::size_t conv_scratch = conv_dst + 32;
  const std::uint32_t wmask = (1u << wb) - 1;

  std::vector<const BitPlaneArray*> lanes;
  std::vector<CycleLedger> start(apt);
  for (std::size_t a = 0; a < apt; ++a) {
    BitPlaneArray& arr = cluster.array(opt.first_array + a);
    arr.activate_all();
    start[a] = arr.ledger();
    lanes.push_back(&arr);
  }

  std::vector<std::uint64_t> words(cc.array_cols);
  const std::size_t levels = ceil_log2(apt);

  for (std::size_t seg = 0; seg < segments; ++seg) {
    const std::size_t k_begin = seg * seg_len;
    const std::size_t k_end = k_begin + seg_len;
    const std::size_t groups = (seg_len + nbw - 1) / nbw;

    for (std::size_t a = 0; a < apt; ++a) {
      BitPlaneArray& arr = cluster.array(opt.first_array + a);
      BitPlaneArray::CategoryScope other(arr, CycleCategory::Other);
      arr.clear_rows(0, B * 32);
    }

    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t k0 = k_begin + g * nbw;
      for (std::size_t a = 0; a < apt; ++a) {
        BitPlaneArray& arr = cluster.array(opt.first_array + a);
        const std::size_t col0 = cols.begin + a * cc.array_cols;

        // Step 3: read the group's weight rows from the slice, transpose each
        // basis weight into its singleton entry, then form the other sums.
        {
          BitPlaneArray::CategoryScope scope(arr, CycleCategory::LutBuild);
          arr.charge(opt.cost.slice_access_cycles);
        }
        {
          BitPlaneArray::CategoryScope scope(arr, CycleCategory::Transpose);
          for (unsigned j = 0; j < nbw; ++j) {
            const std::size_t k = k0 + j;
            for (std::size_t c = 0; c < cc.array_cols; ++c)
              words[c] = k < k_end ? static_cast<std::uint32_t>(w_codes[(col0 + c) * T + k]) & wmask : 0;
            const unsigned m = 1u << (nbw - 1 - j);
            arr.transpose_in(words, wb, table.row(m), 0);
            table.width[m] = wb;
          }
        }
        {
          BitPlaneArray::CategoryScope scope(arr, CycleCategory::LutBuild);
          for (unsigned m = 1; m < (1u << nbw); ++m) {
            if (std::popcount(m) < 2) continue;
            const unsigned prev = m & (m - 1);
            const unsigned single = m & (~m + 1);
            const unsigned w = table.width[prev];
            arr.bitserial_add_signed(table.row(prev), w, table.row(single), wb, table.row(m), w);
            table.width[m] = w + 1;
          }
        }

        // Step 4: broadcast activation bits LSB first; each pattern selects
        // one entry, added into the accumulator at the bit's weight.
        BitPlaneArray::CategoryScope scope(arr, CycleCategory::LookupAccumulate);
        for (std::size_t b = 0; b < B; ++b) {
          for (unsigned bit = 0; bit < ab; ++bit) {
            unsigned p = 0;
            for (unsigned j = 0; j < nbw; ++j) {
              const std::size_t k = k0 + j;
              const std::uint32_t x = k < k_end ? static_cast<std::uint32_t>(x_codes[b * T + k]) : 0;
              p |= ((x >> bit) & 1u) << (nbw - 1 - j);
            }
            arr.charge(opt.cost.lookup_cycles);
            if (p == 0)
              arr.charge(cost::add_cycles(opt.cost.accumulator_width));
            else
              arr.accumulate_shifted(table.row(p), table.width[p], b * 32, opt.cost.accumulator_width, bit);
          }
        }
      }
      ++res.group_iterations;
      trace_line(opt, "iter " + std::to_string(res.group_iterations - 1) + " step3 build k=" +
                          std::to_string(k0) + " step4 rows=" + std::to_string(B) +
                          " lookups=" + std::to_string(B * ab));
    }

    // Partial results of the arrays meet in the DFM adder tree.
    res.ledger.charge(CycleCategory::Aggregate, B * levels * opt.cost.aggregation_cycles_per_level);

    // Step 5: exact conversion in the arrays, then dequantization on the CPU.
    std::vector<std::int64_t> zp_wsum(T);
    for (std::size_t c = 0; c < T; ++c) {
      std::int64_t s = 0;
      for (std::size_t k = k_begin; k < k_end; ++k) s += w_codes[(cols.begin + c) * T + k];
      zp_wsum[c] = s * zp;
    }
    for (std::size_t b = 0; b < B; ++b) {
      const float sx = inputs.scale(b, k_begin);
      for (std::size_t a = 0; a < apt; ++a) {
        BitPlaneArray& arr = cluster.array(opt.first_array + a);
        const auto sat = twos_complement_to_sm(arr, b * 32, n_conv);
        if (sat.count != 0) throw CapacityError("accumulator saturated during conversion");
        int_to_float_inmem(arr, b * 32, n_conv, conv_dst, conv_scratch);
        for (std::size_t c = 0; c < cc.array_cols; ++c) {
          const std::size_t tc = a * cc.array_cols + c;
          const auto bits = static_cast<std::uint32_t>(arr.read_column(c, conv_dst, 32));
          const float acc = std::bit_cast<float>(bits);
          const float sw = weights.scale(cols.begin + tc, k_begin);
          res.output[b * T + tc] += dequant_term(sw, sx, acc, zp_wsum[tc]);
        }
      }
      res.ledger.charge(CycleCategory::Other, static_cast<std::uint64_t>(std::ceil(
                                                  opt.dequant_cycles_per_element * static_cast<double>(T))));
    }
    trace_line(opt, "step5 convert n=" + std::to_string(n_conv) + " dequant rows=" + std::to_string(B) +
                        " segment=" + std::to_string(seg));
  }

  // The arrays of a tile run in lockstep; one of them stands for the tile.
  const CycleLedger lead = lanes.front()->ledger() - start.front();
  for (std::size_t a = 1; a < apt; ++a)
    if (lanes[a]->ledger() - start[a] != lead)
      throw std::logic_error("execute_instruction: arrays diverged");
  res.ledger += lead;

  std::vector<std::uint8_t> out_bytes(res.output.size() * 4);
  for (std::size_t i = 0; i < res.output.size(); ++i) {
    const auto v = std::bit_cast<std::uint32_t>(res.output[i]);
    for (int k = 0; k < 4; ++k) out_bytes[4 * i + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
  state.memory.write(rd, out_bytes);
  return res;
}

}  // namespace sail
