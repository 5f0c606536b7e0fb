#include <gtest/gtest.h>

#include <bit>
#include <random>
#include <sstream>

#include "sail/arch.hpp"
#include "sail/pipeline.hpp"
#include "sail/sailt.hpp"
#include "sail/typeconv.hpp"

using namespace sail;

// --- instruction ------------------------------------------------------------

TEST(Isa, RoundTripRandomInstructions) {
  std::mt19937 rng(1);
  const unsigned qls[] = {2, 3, 4, 5, 6, 8};
  for (int i = 0; i < 20000; ++i) {
    LutmmInstruction in;
    in.sc = rng() % 8;
    in.loc = rng() % std::min(16u, 1u << in.sc);
    in.rw = rng() % 32, in.ri = rng() % 32, in.rd = rng() % 32;
    in.ql = qls[rng() % 6];
    const auto word = encode(in);
    EXPECT_EQ(word & 0x7F, kLutmmOpcode);
    ASSERT_EQ(decode(word), in);
  }
}

TEST(Isa, FieldErrors) {
  LutmmInstruction in;
  in.ql = 7;
  EXPECT_THROW(encode(in), IsaError);
  in.ql = 4;
  in.sc = 0, in.loc = 1;
  EXPECT_THROW(encode(in), IsaError);
  in.sc = 8, in.loc = 0;
  EXPECT_THROW(encode(in), IsaError);
  in.sc = 7, in.loc = 16;
  EXPECT_THROW(encode(in), IsaError);
  in.sc = 0, in.loc = 0;
  EXPECT_NO_THROW(encode(in));
  const auto word = encode(in);
  EXPECT_THROW(decode(word ^ 0x1), IsaError);              // opcode
  EXPECT_THROW(decode((word & ~(7u << 12)) | (6u << 12)), IsaError);  // reserved ql
  EXPECT_THROW(decode(word | (1u << 28)), IsaError);        // loc beyond 2^sc
}

TEST(Isa, TileColumns) {
  EXPECT_EQ(tile_columns(5, 3), (ColumnRange{5120, 6144}));
  EXPECT_EQ(tile_columns(0, 0), (ColumnRange{0, 1024}));
  EXPECT_THROW(tile_columns(1, 0), std::out_of_range);
  std::size_t next = 0;
  for (std::size_t loc = 0; loc < 4; ++loc) {
    const auto r = tile_columns(loc, 2);
    EXPECT_EQ(r.begin, next);
    EXPECT_EQ(r.size(), 1024u);
    next = r.end;
  }
  EXPECT_EQ(next, 4096u);
}

// --- hasher -----------------------------------------------------------------

TEST(Hasher, BlockInvarianceAndNeighbours) {
  EXPECT_EQ(hash_address(0), hash_address(511));
  EXPECT_NE(hash_address(0), hash_address(512));
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t block = rng() >> 9;
    const std::size_t s = hash_address(block << 9);
    for (std::uint64_t off = 0; off < 512; off += 37) ASSERT_EQ(hash_address((block << 9) | off), s);
    EXPECT_LT(s, 32u);
  }
}

TEST(Hasher, SequentialBlocksSpreadEvenly) {
  std::vector<std::size_t> hist(32, 0);
  const std::size_t blocks = 1 << 20;
  for (std::uint64_t b = 0; b < blocks; ++b) ++hist[hash_address(b << 9)];
  for (auto h : hist) EXPECT_NEAR(static_cast<double>(h), blocks / 32.0, blocks / 32.0 * 0.01);
}

TEST(Hasher, NonPowerOfTwoSlices) {
  HasherConfig cfg{12, 9};
  std::vector<std::size_t> hist(12, 0);
  for (std::uint64_t b = 0; b < 12000; ++b) ++hist[hash_address(b << 9, cfg)];
  for (auto h : hist) EXPECT_GT(h, 0u);
  EXPECT_THROW(hash_address(0, HasherConfig{0, 9}), std::invalid_argument);
}

// --- mapping ----------------------------------------------------------------

TEST(Mapping, RowSplitEvenShares) {
  std::vector<std::int32_t> tile(64);
  for (int i = 0; i < 64; ++i) tile[i] = i;
  const auto m = map_tile(tile, 8, 8, MappingMode::RowSplit, 4);
  ASSERT_EQ(m.shares.size(), 4u);
  for (const auto& s : m.shares) {
    EXPECT_EQ(s.col_end - s.col_begin, 2u);
    EXPECT_EQ(s.row_end - s.row_begin, 8u);
    EXPECT_EQ(s.data.size(), 16u);
  }
  EXPECT_EQ(m.shares[1].data[0], 2);
}

TEST(Mapping, ColumnSplitKeepsWholeRowsOfTheTransposedCache) {
  // A T x d cached-K tile, stored transposed (d rows of T columns).
  const std::size_t d = 16, T = 12;
  std::vector<std::int32_t> kt(d * T);
  for (std::size_t i = 0; i < kt.size(); ++i) kt[i] = static_cast<std::int32_t>(i);
  const auto m = map_tile(kt, d, T, MappingMode::ColumnSplit, 4, 512);
  for (const auto& s : m.shares) {
    EXPECT_EQ(s.col_begin, 0u);
    EXPECT_EQ(s.col_end, T);
    EXPECT_EQ(s.row_end - s.row_begin, 4u);
  }
}

TEST(Mapping, ReassemblyIsInverseInBothModes) {
  std::mt19937 rng(5);
  for (auto mode : {MappingMode::RowSplit, MappingMode::ColumnSplit})
    for (int rep = 0; rep < 30; ++rep) {
      const std::size_t r = 1 + rng() % 40, c = 1 + rng() % 40, a = 1 + rng() % 7;
      std::vector<std::int32_t> tile(r * c);
      for (auto& x : tile) x = static_cast<std::int32_t>(rng());
      const auto m = map_tile(tile, r, c, mode, a);
      std::size_t total = 0;
      for (const auto& s : m.shares) total += s.data.size();
      EXPECT_EQ(total, tile.size());
      EXPECT_EQ(reassemble(m), tile);
    }
}

TEST(Mapping, OverflowIsRejected) {
  std::vector<std::int32_t> tile(2 * 1100);
  EXPECT_THROW(map_tile(tile, 2, 1100, MappingMode::RowSplit, 2, 512), GeometryError);
  EXPECT_THROW(map_tile(tile, 2, 1100, MappingMode::ColumnSplit, 2, 512), GeometryError);
}

// --- memory -------------------------------------------------------------------

TEST(SimMemory, ReadWriteAndUnmapped) {
  SimMemory m;
  m.map(0x1000, {1, 2, 3, 4});
  m.map_zero(0x2000, 8);
  EXPECT_EQ(m.read(0x1001, 2)[1], 3);
  const std::uint8_t v[] = {9, 9};
  m.write(0x2006, v);
  EXPECT_EQ(m.read(0x2007, 1)[0], 9);
  EXPECT_THROW(m.read(0x1003, 2), UnmappedAddressError);
  EXPECT_THROW(m.read(0x0, 1), UnmappedAddressError);
  EXPECT_THROW(m.write(0x2007, v), UnmappedAddressError);
  EXPECT_THROW(m.map(0x1002, {0}), std::invalid_argument);
}

// --- execution ------------------------------------------------------------------

namespace {

struct TileRun {
  ExecutionResult res;
  std::vector<float> expect;
  std::vector<float> got;
};

TileRun run_tile(std::size_t T, std::size_t array_cols, unsigned wb, unsigned nbw, std::size_t B, unsigned seed,
                 bool zero_inputs = false, std::ostream* trace = nullptr, unsigned sc = 0, unsigned loc = 0) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d;
  const std::size_t seg = segment_length(T, wb, 8);
  std::vector<float> wv((T << sc) * T), xv(B * T);
  for (auto& x : wv) x = d(rng);
  for (auto& x : xv) x = zero_inputs ? 0.0f : d(rng);
  const auto W = quantize(wv, T << sc, T, wb, seg, TensorKind::Weight);
  const auto X = quantize(xv, B, T, 8, seg, TensorKind::Activation);

  MachineState st;
  st.memory.map(0x100000, encode_sailt(W));
  st.memory.map(0x800000, encode_sailt(X));
  st.memory.map_zero(0xC00000, B * T * 4);
  st.regs[5] = 0x100000, st.regs[6] = 0x800000, st.regs[7] = 0xC00000;
  LutmmInstruction in{loc, sc, 5, 6, wb, 7};

  ClusterConfig cc;
  cc.tile_dim = T;
  cc.array_cols = array_cols;
  CSramCluster cluster(cc);
  ExecuteOptions opt;
  opt.nbw = nbw;
  opt.round_trip = seg == T ? RoundTrip::PerTile : RoundTrip::PerQuantGroup;
  opt.trace = trace;

  TileRun run;
  run.res = execute_instruction(cluster, decode(encode(in)), st, opt);

  // Oracle: integer GEMV per round trip, exact conversion, dequantization.
  const auto wc = W.codes();
  const auto xc = X.codes();
  const std::size_t c0 = loc * T;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < T; ++c) {
      float y = 0.0f;
      for (std::size_t k0 = 0; k0 < T; k0 += seg) {
        std::int64_t acc = 0, ws = 0;
        for (std::size_t k = k0; k < k0 + seg; ++k) {
          acc += static_cast<std::int64_t>(wc[(c0 + c) * T + k]) * xc[b * T + k];
          ws += wc[(c0 + c) * T + k];
        }
        y += dequant_term(W.scale(c0 + c, k0), X.scale(b, k0), static_cast<float>(acc), ws * X.zero_point());
      }
      run.expect.push_back(y);
      const auto bytes = st.memory.read(0xC00000 + 4 * (b * T + c), 4);
      std::uint32_t u = 0;
      for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
      run.got.push_back(std::bit_cast<float>(u));
    }
  return run;
}

}  // namespace

TEST(Execute, ReducedTileExactForEveryQlAndNbw) {
  for (unsigned wb : {2u, 3u, 4u, 5u, 6u, 8u})
    for (unsigned nbw = 1; nbw <= 4; ++nbw) {
      const auto r = run_tile(64, 32, wb, nbw, 2, wb * 10 + nbw);
      ASSERT_EQ(r.got.size(), r.expect.size());
      for (std::size_t i = 0; i < r.got.size(); ++i)
        ASSERT_EQ(std::bit_cast<std::uint32_t>(r.got[i]), std::bit_cast<std::uint32_t>(r.expect[i]))
            << wb << " " << nbw << " " << i;
      EXPECT_EQ(r.res.group_iterations, (64 + nbw - 1) / nbw);
    }
}

TEST(Execute, ZeroInputGivesZeroOutput) {
  const auto r = run_tile(64, 32, 4, 2, 1, 3, true);
  for (float y : r.got) EXPECT_EQ(y, 0.0f);
}

TEST(Execute, FullTileAtQl4Nbw2) {
  const auto r = run_tile(1024, 512, 4, 2, 1, 77);
  EXPECT_EQ(r.res.group_iterations, 512u);
  EXPECT_EQ(r.res.round_trips, 1u);
  for (std::size_t i = 0; i < r.got.size(); ++i)
    ASSERT_EQ(std::bit_cast<std::uint32_t>(r.got[i]), std::bit_cast<std::uint32_t>(r.expect[i])) << i;

  // Compute side of the fabric ledger equals the analytic tile model.
  PipelineConfig p;
  p.nbw = 2, p.weight_bits = 4;
  CycleLedger model = tile_compute_ledger(p, 1);
  model.charge(CycleCategory::Load, r.res.ledger[CycleCategory::Load]);
  EXPECT_EQ(r.res.ledger, model);
  EXPECT_EQ(r.res.tile_bytes, 1024u * 512);
  std::size_t blocks = 0;
  for (auto b : r.res.slice_blocks) blocks += b;
  // The 21-byte header leaves the codes one block off alignment.
  EXPECT_EQ(blocks, 1025u);
}

TEST(Execute, EightBitTileSplitsRoundTrips) {
  const auto r = run_tile(1024, 512, 8, 2, 1, 8);
  EXPECT_EQ(r.res.round_trips, 2u);
  EXPECT_LE(r.res.conversion_width, kMaxConvertWidth);
  for (std::size_t i = 0; i < r.got.size(); ++i)
    ASSERT_EQ(std::bit_cast<std::uint32_t>(r.got[i]), std::bit_cast<std::uint32_t>(r.expect[i])) << i;
}

TEST(Execute, LocSelectsOutputTile) {
  const auto r = run_tile(64, 32, 4, 3, 1, 5, false, nullptr, 2, 3);
  for (std::size_t i = 0; i < r.got.size(); ++i)
    ASSERT_EQ(std::bit_cast<std::uint32_t>(r.got[i]), std::bit_cast<std::uint32_t>(r.expect[i])) << i;
}

TEST(Execute, TraceHasOneLinePerStagePerIteration) {
  std::ostringstream trace;
  const auto r = run_tile(64, 32, 4, 2, 1, 9, false, &trace);
  std::size_t iters = 0, lines = 0;
  std::string line;
  std::istringstream in(trace.str());
  while (std::getline(in, line)) {
    ++lines;
    iters += line.rfind("iter ", 0) == 0;
  }
  EXPECT_EQ(iters, r.res.group_iterations);
  EXPECT_EQ(lines, iters + 3);
}

TEST(Execute, Errors) {
  MachineState st;
  ClusterConfig cc;
  cc.tile_dim = 64, cc.array_cols = 32;
  CSramCluster cluster(cc);
  LutmmInstruction in{0, 0, 1, 2, 4, 3};
  st.regs[1] = 0x100;
  EXPECT_THROW(execute_instruction(cluster, in, st), UnmappedAddressError);

  std::vector<float> w(64 * 64, 1.0f), x(64 * 64, 1.0f);
  st.memory.map(0x1000, encode_sailt(quantize(w, 64, 64, 4, 64)));
  st.memory.map(0x100000, encode_sailt(quantize(x, 64, 64, 8, 64, TensorKind::Activation)));
  st.memory.map_zero(0x200000, 64 * 64 * 4);
  st.regs[1] = 0x1000, st.regs[2] = 0x100000, st.regs[3] = 0x200000;
  EXPECT_THROW(execute_instruction(cluster, in, st), CapacityError);  // 64 rows of batch
  in.ql = 2;
  EXPECT_THROW(execute_instruction(cluster, in, st), std::invalid_argument);  // ql mismatch
}
