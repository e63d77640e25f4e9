/* Copyright 2026 The swconv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

// Command-line front end: subcommands verify, coverage, erf, params,
// prune-sim, bench and gen-golden. Every subcommand writes CSV tables and a
// summary.json into the output directory and never replaces an existing file
// unless --force is given.
//
// Exit status: 0 when every enabled check passes, 1 when a check fails,
// 2 on usage, configuration or I/O errors.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "swconv/suites.hpp"

namespace swconv {

inline constexpr const char* kToolVersion = "1.0.0";

struct RunConfig {
  std::string subcommand;
  std::string spec;                 // operator spec (SwConfig) or arch spec, per subcommand
  std::vector<std::string> inputs;  // tensor input paths (SWT1)
  std::string out = "swconv_out";
  std::uint64_t seed = kDefaultSeed;
  std::string dtype = "f64";
  std::optional<double> tol;
  std::size_t threads = 0;  // 0: SW_NUM_THREADS or hardware concurrency
  bool force = false;
};

/// Output directory that refuses to replace files without force and records
/// what it wrote.
class OutDir {
 public:
  OutDir(std::filesystem::path root, bool force) : root_(std::move(root)), force_(force) {
    std::filesystem::create_directories(root_);
  }
  const std::filesystem::path& root() const { return root_; }

  void text(const std::string& rel, const std::string& content) {
    const auto p = root_ / rel;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    write_text_file(p, content, force_);
    files_.push_back(rel);
  }
  template <Real T>
  void tensor(const std::string& rel, const Tensor<T>& t) {
    const auto bytes = encode_container(t);
    text(rel, std::string(bytes.begin(), bytes.end()));
  }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path root_;
  bool force_;
  std::vector<std::string> files_;
};

struct CommandOutput {
  std::vector<CheckResult> checks;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
  std::string human;  // printed to stdout; may include timings

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

namespace cli_detail {

inline std::vector<std::size_t> parse_size_list(const std::string& s, const char* what) {
  std::vector<std::size_t> out;
  for (const auto& p : split(s, ',')) out.push_back(parse_int<std::size_t>(trim(p), what));
  if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
  return out;
}

inline std::vector<double> parse_real_list(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& p : split(s, ',')) out.push_back(parse_real(trim(p), what));
  if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
  return out;
}

inline SwConfig load_sw_spec(const std::string& path) { return parse_sw_config(read_text_file(path)); }

inline ArchSpec load_arch(const std::string& spec, const std::string& preset) {
  if (!spec.empty()) return parse_arch_spec(read_text_file(spec));
  if (preset == "tiny") return ArchSpec::sw_tiny();
  if (preset == "small") return ArchSpec::sw_small();
  throw ConfigError("unknown preset '" + preset + "' (tiny|small)");
}

inline bool is_f32(const RunConfig& rc) {
  if (rc.dtype == "f32") return true;
  if (rc.dtype == "f64") return false;
  throw ConfigError("dtype must be f32 or f64");
}

inline std::string human_checks(const std::vector<CheckResult>& cs) {
  std::ostringstream os;
  for (const auto& c : cs) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << "  cases=" << c.cases << " max_diff=" << format_real(c.max_diff)
       << " tol=" << format_real(c.tol);
    if (!c.note.empty()) os << "  " << c.note;
    os << "  (" << format_real(std::round(c.seconds * 1000.0) / 1000.0) << " s)\n";
  }
  return os.str();
}

inline std::string manifest_csv(const OutDir& out) {
  CsvWriter csv({"file", "bytes", "fnv1a"});
  for (const auto& f : out.files()) {
    const auto s = read_text_file(out.root() / f);
    csv.row({f, std::to_string(s.size()), hex64(fnv1a(s))});
  }
  return csv.str();
}

/// Compares files listed in a MANIFEST.csv against their recorded hashes.
inline CheckResult check_manifest(const std::filesystem::path& dir) {
  return timed_check("weights_integrity", [&](CheckResult& r) {
    const auto lines = split(read_text_file(dir / "MANIFEST.csv"), '\n');
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      const auto cells = split(lines[i], ',');
      if (cells.size() != 3) throw FormatError("bad MANIFEST.csv line " + std::to_string(i + 1));
      ++r.cases;
      const auto path = dir / cells[0];
      if (!std::filesystem::exists(path) || hex64(fnv1a(read_text_file(path))) != cells[2]) {
        r.passed = false;
        r.note += cells[0] + " corrupted; ";
      }
    }
  });
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// verify

struct VerifyOptions {
  std::size_t trials = 200;
  std::string weights;  // directory written by save_sw_weights
  std::size_t H = 24, W = 24;
};

template <Real T>
std::vector<CheckResult> verify_operator(const RunConfig& rc, const VerifyOptions& vo, double tol) {
  const auto cfg = cli_detail::load_sw_spec(rc.spec);
  std::vector<CheckResult> checks;
  SwWeights<T> w;
  if (!vo.weights.empty()) {
    if (std::filesystem::exists(std::filesystem::path(vo.weights) / "MANIFEST.csv"))
      checks.push_back(cli_detail::check_manifest(vo.weights));
    bool loaded = false;
    checks.push_back(timed_check("load_weights", [&](CheckResult& r) {
      w = load_sw_weights<T>(cfg, vo.weights);
      r.cases = 1;
      loaded = true;
    }));
    if (!loaded) return checks;
  } else {
    w = random_sw_weights<T>(cfg, rc.seed);
    for (std::size_t t = 0; t < kBranchTypes; ++t)
      w.norm[t] = random_norm<T>(cfg.sw_channels(), derive_key({rc.seed, t}), cfg.eps);
  }
  for (auto& c : check_operator<T>(cfg, w, vo.H, vo.W, rc.seed, tol)) checks.push_back(std::move(c));
  return checks;
}

inline CommandOutput cmd_verify(const RunConfig& rc, const VerifyOptions& vo, OutDir& out) {
  if (vo.trials == 0) throw ConfigError("--trials must be at least 1");
  const bool f32 = cli_detail::is_f32(rc);
  CommandOutput res;
  if (!rc.spec.empty()) {
    const double tol = rc.tol.value_or(f32 ? 1e-4 : 1e-10);
    res.checks = f32 ? verify_operator<float>(rc, vo, tol) : verify_operator<double>(rc, vo, tol);
    res.extra["mode"] = "spec";
  } else {
    const auto cases = sweep_cases(vo.trials, rc.seed);
    const std::vector<SweepCase> head(cases.begin(), cases.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(50, cases.size())));
    res.checks.push_back(check_exact_equivalence<double>(cases, rc.tol.value_or(1e-10)));
    res.checks.push_back(check_exact_equivalence<float>(cases, 1e-4));
    res.checks.push_back(check_interior_band(cases));
    res.checks.push_back(check_densify(head));
    res.checks.push_back(check_fold(100, rc.seed));
    res.checks.push_back(check_merge(head));
    res.checks.push_back(check_erf_strip(3, rc.seed));
    res.extra["mode"] = "sweep";
    res.extra["configs"] = vo.trials;
  }
  out.text("verify.csv", checks_csv(res.checks));
  res.human = cli_detail::human_checks(res.checks);
  return res;
}

// ---------------------------------------------------------------------------
// coverage

struct CoverageOptions {
  std::size_t M = 51, N = 3;
  std::string sizes = "14,28,56";
  std::string edges = "1,2,4,8";
  std::size_t seeds = 20;
  std::size_t channels = 16;
  std::string policies = "ordered,per_edge_shuffled";
};

inline CommandOutput cmd_coverage(const RunConfig& rc, CoverageOptions co, OutDir& out) {
  std::vector<OrderPolicy> policies;
  for (const auto& p : split(co.policies, ',')) policies.push_back(parse_order_policy(std::string(trim(p))));
  if (!rc.spec.empty()) {
    const auto cfg = cli_detail::load_sw_spec(rc.spec);
    co.M = cfg.M;
    co.N = cfg.N;
  }
  const auto sizes = cli_detail::parse_size_list(co.sizes, "sizes");
  const auto edges = cli_detail::parse_size_list(co.edges, "edges");
  if (co.seeds == 0) throw ConfigError("--seeds must be positive");
  CoverageQuery base;
  base.M = co.M;
  base.N = co.N;
  base.channels = co.channels;
  base.seeds.clear();
  for (std::size_t i = 0; i < co.seeds; ++i) base.seeds.push_back(derive_key({rc.seed, i}));

  CommandOutput res;
  CsvWriter csv({"H", "policy", "E", "mean_utilization", "min_utilization", "max_utilization"});
  for (auto h : sizes) {
    auto q = base;
    q.H = q.W = h;
    for (auto pol : policies) {
      q.policy = pol;
      for (auto e : edges) {
        q.E = e;
        const auto s = coverage_ratio(q);
        csv.row({std::to_string(h), to_string(pol), std::to_string(e), format_real(s.mean), format_real(s.min),
                 format_real(s.max)});
      }
      if (pol == OrderPolicy::ordered) {
        auto c = check_coverage_ordered(q, edges);
        c.name += "_H" + std::to_string(h);
        res.checks.push_back(std::move(c));
      } else if (pol == OrderPolicy::per_edge_shuffled && edges.size() > 1) {
        auto c = check_coverage_shuffled(q, edges);
        c.name += "_H" + std::to_string(h);
        res.checks.push_back(std::move(c));
      }
    }
  }
  out.text("coverage.csv", csv.str());
  res.human = cli_detail::human_checks(res.checks);
  return res;
}

// ---------------------------------------------------------------------------
// erf

struct ErfOptions {
  std::size_t probe = 63;
  std::size_t layers = 1;
  bool pgm = false;
};

/// ERF of `layers` stacked single-channel operators built from the spec with
/// seeded weights and identity norms. Also checks the strip equivalence for
/// a random strip kernel of the same M x N.
inline CommandOutput cmd_erf(const RunConfig& rc, const ErfOptions& eo, OutDir& out) {
  SwConfig cfg;
  cfg.M = 51;
  cfg.N = 3;
  if (!rc.spec.empty()) cfg = cli_detail::load_sw_spec(rc.spec);
  cfg.C = 1;
  cfg.G = 0.0;
  if (eo.layers == 0) throw ConfigError("--layers must be positive");
  std::vector<ErfLayer> stack;
  for (std::size_t l = 0; l < eo.layers; ++l) {
    auto c = cfg;
    c.layer_id = l;
    stack.push_back(SwLayer{c, random_sw_weights<double>(c, rc.seed), build_shift_plan(c)});
  }
  const auto m = erf_map(stack, eo.probe);
  CommandOutput res;
  out.tensor("erf.swt", m);
  CsvWriter csv({"row", "col", "value"});
  for (std::size_t i = 0; i < eo.probe; ++i)
    for (std::size_t j = 0; j < eo.probe; ++j) csv.row({std::to_string(i), std::to_string(j), format_real(m.at(i, j))});
  out.text("erf.csv", csv.str());
  if (eo.pgm) {
    std::ostringstream os(std::ios::binary);
    os << "P5\n" << eo.probe << " " << eo.probe << "\n255\n";
    for (double v : m.data()) os.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    out.text("erf.pgm", os.str());
  }
  res.checks.push_back(timed_check("erf_strip", [&](CheckResult& r) {
    r.tol = rc.tol.value_or(1e-6);
    const auto k = random_tensor<double>(chw(1, cfg.M, cfg.N), derive_key({rc.seed, 0x4b}));
    const auto lay = from_strip(k);
    const Tensor<double> k2(Shape{static_cast<std::int64_t>(cfg.M), static_cast<std::int64_t>(cfg.N)},
                            std::vector<double>(k.data().begin(), k.data().end()));
    record(r, max_abs_diff(erf_map({SwLayer{lay.cfg, lay.weights, lay.plan}}, eo.probe), erf_map({DepthwiseLayer{k2}}, eo.probe)));
  }));
  double mass = 0;
  for (double v : m.data()) mass += v;
  res.extra["erf_sum"] = mass;
  res.human = cli_detail::human_checks(res.checks);
  return res;
}

// ---------------------------------------------------------------------------
// params

struct ParamsOptions {
  std::string preset = "tiny";
  std::size_t input = 224;
};

inline std::string cost_table_csv(const std::vector<CostRow>& rows, std::size_t n) {
  CsvWriter csv({"id", "label", "N", "closed_macs", "counted_macs", "closed_params", "counted_params", "match"});
  for (const auto& r : rows)
    csv.row({r.id, r.label, std::to_string(r.id == "#7" ? 3 : n), std::to_string(r.closed_macs), std::to_string(r.counted_macs),
             std::to_string(r.closed_params), std::to_string(r.counted_params),
             r.closed_macs == r.counted_macs && r.closed_params == r.counted_params ? "yes" : "no"});
  return csv.str();
}

inline CommandOutput cmd_params(const RunConfig& rc, const ParamsOptions& po, OutDir& out) {
  const auto arch = cli_detail::load_arch(rc.spec, po.preset);
  const auto rep = count_arch(arch, po.input);
  CsvWriter csv({"layer", "params", "macs"});
  for (const auto& r : rep.rows) csv.row({r.layer, std::to_string(r.params), std::to_string(r.macs)});
  csv.row({"TOTAL", std::to_string(rep.total_params()), std::to_string(rep.total_macs())});
  out.text("params.csv", csv.str());

  CommandOutput res;
  CostSetup t;
  t.seed = rc.seed;
  out.text("cost_forms.csv", cost_table_csv(cost_table_rows(t), t.N));
  auto t3 = t;
  t3.N = 3;
  res.checks.push_back(check_cost_forms({t, t3}));
  const auto fan = stage_fanouts(arch);
  res.extra["stage_fanouts"] = fan;
  res.extra["total_params"] = rep.total_params();
  res.extra["total_macs"] = rep.total_macs();
  if (serialize(arch) == serialize(ArchSpec::sw_tiny()) && po.input == 224) {
    res.checks.push_back(check_budget(arch));
    res.checks.push_back(check_fanouts(arch, {17, 17, 16, 5}));
  }
  res.human = "params " + std::to_string(rep.total_params()) + ", MACs " + std::to_string(rep.total_macs()) + " at " +
              std::to_string(po.input) + "^2\n" + cli_detail::human_checks(res.checks);
  return res;
}

// ---------------------------------------------------------------------------
// prune-sim

struct PruneOptions {
  std::string preset = "tiny";
  std::size_t steps = 10000;
  double s = 0.4;
  std::size_t u = 100;
  std::size_t gap = 1;
  std::string policy = "shared";
  std::string init = "uniform";
  std::string grow = "uniform";
};

inline CommandOutput cmd_prune_sim(const RunConfig& rc, const PruneOptions& po, OutDir& out) {
  SparsitySimConfig sim;
  sim.arch = cli_detail::load_arch(rc.spec, po.preset);
  sim.steps = po.steps;
  sim.schedule.s = po.s;
  sim.schedule.u = po.u;
  sim.schedule.share_gap = po.gap;
  sim.schedule.policy = parse_mask_policy(po.policy);
  sim.schedule.seed = rc.seed;
  sim.init = parse_init_policy(po.init);
  sim.grow = parse_grow_stream(po.grow);
  sim.schedule.validate();

  CommandOutput res;
  SparsityTrace tr;
  res.checks.push_back(timed_check("simulation", [&](CheckResult& r) {
    tr = simulate_sparsity(sim);
    r.cases = tr.updates.size();
  }));
  if (!res.checks.back().passed) return res;

  CsvWriter trace({"update", "step", "synced", "max_count_deviation", "branches_equal", "merged_sparsity"});
  for (const auto& u : tr.updates)
    trace.row({std::to_string(u.index), std::to_string(u.step), u.synced ? "1" : "0", std::to_string(u.max_dev),
               u.branches_equal ? "1" : "0", format_real(u.sparsity)});
  out.text("prune_trace.csv", trace.str());

  const auto st = mask_stats(tr.final_masks, sim.arch);
  CsvWriter layers({"layer", "stage", "sparsity"});
  for (const auto& l : st.layers) layers.row({std::to_string(l.layer), std::to_string(l.stage), format_real(l.sparsity)});
  out.text("layer_sparsity.csv", layers.str());
  CsvWriter idx({"stage", "k", "pruned_fraction", "baseline"});
  for (const auto& r : st.per_index)
    idx.row({std::to_string(r.stage), std::to_string(r.k), format_real(r.pruned_fraction), format_real(st.baseline[r.stage])});
  out.text("per_index.csv", idx.str());
  CsvWriter hist({"stage", "pruned_count", "group_fraction"});
  for (const auto& r : st.histogram)
    hist.row({std::to_string(r.stage), std::to_string(r.pruned_count), format_real(r.group_fraction)});
  out.text("histogram.csv", hist.str());

  res.checks.push_back(timed_check("sparsity_within_one_filter", [&](CheckResult& r) {
    r.tol = 1;
    for (const auto& u : tr.updates) record(r, static_cast<double>(u.max_dev));
  }));
  res.checks.push_back(timed_check("sync_schedule", [&](CheckResult& r) {
    for (const auto& u : tr.updates) {
      ++r.cases;
      if (u.synced != (u.index % po.gap == 0)) r.passed = false;
    }
  }));
  if (sim.schedule.policy == MaskPolicy::shared)
    res.checks.push_back(timed_check("shared_masks_identical_after_sync", [&](CheckResult& r) {
      for (const auto& u : tr.updates)
        if (u.synced) {
          ++r.cases;
          if (!u.branches_equal) r.passed = false;
        }
    }));
  res.extra["updates"] = tr.updates.size();
  res.extra["mask_digest"] = hex64(tr.digest);
  res.human = cli_detail::human_checks(res.checks);
  return res;
}

// ---------------------------------------------------------------------------
// bench

struct BenchCliOptions {
  std::size_t H = 56, W = 56;
  std::size_t reps = 5;
  std::string variants = "naive,fused,tiled,parallel";
  std::size_t tile_rows = 0;
  bool relaxed = false;
  std::string densities = "1,0.8,0.6,0.4";
};

template <Real T>
CommandOutput bench_typed(const RunConfig& rc, const BenchCliOptions& bo, OutDir& out) {
  const SwConfig cfg = rc.spec.empty() ? desk_config() : cli_detail::load_sw_spec(rc.spec);
  const auto p = make_bench_problem<T>(cfg, bo.H, bo.W, rc.seed);
  BenchOptions o;
  o.reps = bo.reps;
  o.threads = rc.threads;
  o.tile_rows = bo.tile_rows;
  CommandOutput res;
  std::vector<BenchReport> reports;
  for (const auto& name : split(bo.variants, ',')) reports.push_back(run_variant(parse_variant(std::string(trim(name))), p, o));
  if (bo.relaxed) {
    auto r = o;
    r.relaxed = true;
    reports.push_back(run_variant(Variant::parallel, p, r));
  }
  out.text("bench.csv", bench_csv(reports));

  res.checks.push_back(timed_check("checksums_equal", [&](CheckResult& r) {
    for (const auto& rep : reports) {
      if (rep.variant == "parallel_relaxed") continue;
      ++r.cases;
      if (rep.checksum != reports.front().checksum) r.passed = false;
    }
  }));
  for (const auto& rep : reports)
    if (rep.variant == "fused")
      res.checks.push_back(timed_check("fused_moves_le_2E_plus_1", [&](CheckResult& r) {
        r.tol = static_cast<double>(2 * cfg.E + 1);
        record(r, rep.moves_per_output_pixel);
      }));
  res.checks.push_back(timed_check("variants_vs_oracle", [&](CheckResult& r) {
    r.tol = rc.tol.value_or(std::is_same_v<T, float> ? 1e-5 : 1e-10);
    BenchOptions vo = o;
    vo.relaxed = bo.relaxed;
    CsvWriter csv({"variant", "max_abs_diff", "bitwise_equal_fused"});
    for (const auto& row : verify_variants<T>(cfg, bo.H, bo.W, 1, vo, rc.seed)) {
      record(r, row.max_abs_diff);
      csv.row({row.variant, format_real(row.max_abs_diff), row.matches_fused ? "1" : "0"});
    }
    out.text("bench_verify.csv", csv.str());
  }));
  const BenchReport* naive = nullptr;
  const BenchReport* fused = nullptr;
  for (const auto& rep : reports) {
    if (rep.variant == "naive") naive = &rep;
    if (rep.variant == "fused") fused = &rep;
  }
  if (naive && fused && serialize(cfg) == serialize(desk_config()) && bo.H == 56 && bo.W == 56)
    res.checks.push_back(timed_check("fused_time_le_1.10_naive", [&](CheckResult& r) {
      r.tol = 1.10;
      record(r, paired_time_ratio(Variant::naive, Variant::fused, p, o));
    }));

  const auto dens = cli_detail::parse_real_list(bo.densities, "densities");
  const auto sp = sparsity_speedup<T>(cfg, bo.H, bo.W, dens, o, rc.seed);
  CsvWriter csv({"density", "kept", "total", "macs", "mac_reduction", "median_ns", "time_ratio"});
  for (const auto& r : sp)
    csv.row({format_real(r.density), std::to_string(r.kept), std::to_string(r.total), std::to_string(r.macs),
             format_real(r.mac_reduction), format_real(r.median_ns), format_real(r.time_ratio)});
  out.text("sparsity_speedup.csv", csv.str());
  res.checks.push_back(timed_check("macs_linear_in_density", [&](CheckResult& r) {
    const std::uint64_t dense = sp.empty() ? 0 : static_cast<std::uint64_t>(static_cast<double>(sp.front().macs) * sp.front().mac_reduction);
    for (const auto& row : sp) {
      ++r.cases;
      if (row.macs * row.total != dense * row.kept) r.passed = false;
    }
  }));

  std::ostringstream os;
  os << "# moves_per_pixel counts destination-accumulation events per fan-out output pixel\n";
  for (const auto& rep : reports)
    os << rep.variant << ": median " << format_real(rep.median_ns / 1e6) << " ms (MAD " << format_real(rep.mad_ns / 1e6)
       << "), moves/pixel " << rep.moves_per_output_pixel << ", peak scratch " << rep.peak_intermediate_bytes
       << " B, threads " << rep.threads << ", tile rows " << rep.tile_rows << ", checksum " << rep.checksum << "\n";
  res.human = os.str() + cli_detail::human_checks(res.checks);
  res.extra["config_digest"] = reports.empty() ? "" : reports.front().config_digest;
  return res;
}

inline CommandOutput cmd_bench(const RunConfig& rc, const BenchCliOptions& bo, OutDir& out) {
  return cli_detail::is_f32(rc) ? bench_typed<float>(rc, bo, out) : bench_typed<double>(rc, bo, out);
}

// ---------------------------------------------------------------------------
// gen-golden

/// Fixed f64 regression artifacts: strip equivalence cases, a full operator
/// in every pad mode with its weights and dense kernel, an ERF map and the
/// counting tables. Output depends only on the seed.
inline CommandOutput cmd_gen_golden(const RunConfig& rc, OutDir& out) {
  CommandOutput res;
  const std::vector<SweepCase> strips = {{51, 3, 2, 24, 20, derive_key({rc.seed, 1})},
                                         {13, 5, 3, 16, 16, derive_key({rc.seed, 2})},
                                         {3, 3, 1, 8, 9, derive_key({rc.seed, 3})},
                                         {49, 5, 2, 12, 30, derive_key({rc.seed, 4})}};
  CsvWriter eq({"case", "M", "N", "C", "H", "W", "max_abs_diff"});
  for (std::size_t i = 0; i < strips.size(); ++i) {
    const auto& sc = strips[i];
    const auto k = random_tensor<double>(chw(sc.C, sc.M, sc.N), derive_key({sc.key, 1}));
    const auto x = random_tensor<double>(chw(sc.C, sc.H, sc.W), derive_key({sc.key, 2}));
    const auto ref = strip_conv_ref(x, k);
    const auto lay = from_strip(k);
    const auto y = sw_forward(x, lay.weights, lay.cfg, lay.plan);
    const std::string p = "strip/case" + std::to_string(i) + "_";
    out.tensor(p + "x.swt", x);
    out.tensor(p + "kernel.swt", k);
    out.tensor(p + "strip_ref.swt", ref);
    out.tensor(p + "sw.swt", y);
    eq.row({std::to_string(i), std::to_string(sc.M), std::to_string(sc.N), std::to_string(sc.C), std::to_string(sc.H),
            std::to_string(sc.W), format_real(max_abs_diff(y, ref))});
  }
  out.text("equivalence.csv", eq.str());

  SwConfig cfg;
  cfg.M = 13;
  cfg.N = 3;
  cfg.C = 6;
  cfg.G = 0.34;
  cfg.E = 2;
  cfg.b = 2;
  cfg.order_policy = OrderPolicy::per_edge_shuffled;
  cfg.seed = rc.seed;
  auto w = random_sw_weights<double>(cfg, rc.seed);
  w.mask[1].set(0, 1, false);
  for (std::size_t t = 0; t < kBranchTypes; ++t)
    w.norm[t] = random_norm<double>(cfg.sw_channels(), derive_key({rc.seed, 0x4e, t}), cfg.eps);
  const auto plan = build_shift_plan(cfg);
  const auto x = random_tensor<double>(chw(cfg.C, 14, 12), derive_key({rc.seed, 0x58}));
  out.text("operator/spec.txt", serialize(cfg));
  out.tensor("operator/x.swt", x);
  {
    OutDir wdir(out.root() / "operator" / "weights", true);
    if (!rc.force && std::filesystem::exists(out.root() / "operator" / "weights" / "MANIFEST.csv"))
      throw ConfigError((out.root() / "operator" / "weights").string() + " exists (pass --force to overwrite)");
    save_sw_weights(w, wdir.root());
    CsvWriter m({"file", "bytes", "fnv1a"});
    std::vector<std::string> names;
    for (const auto& e : std::filesystem::directory_iterator(wdir.root()))
      if (e.path().filename() != "MANIFEST.csv") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    for (const auto& n : names) {
      const auto s = read_text_file(wdir.root() / n);
      m.row({n, std::to_string(s.size()), hex64(fnv1a(s))});
    }
    wdir.text("MANIFEST.csv", m.str());
  }
  CsvWriter modes({"pad_mode", "checksum"});
  for (auto pm : {PadMode::exact, PadMode::half, PadMode::full}) {
    auto c = cfg;
    c.pad_mode = pm;
    const auto y = sw_forward(x, w, c, plan);
    out.tensor(std::string("operator/y_") + to_string(pm) + ".swt", y);
    modes.row({to_string(pm), checksum(y)});
  }
  out.text("operator/outputs.csv", modes.str());
  {
    auto c = cfg;
    c.pad_mode = PadMode::exact;
    out.tensor("operator/dense_kernel.swt", densify_folded(w, plan, c).kernel);
  }

  {
    const auto& sc = strips[1];
    const auto k = random_tensor<double>(chw(1, sc.M, sc.N), derive_key({sc.key, 5}));
    const auto lay = from_strip(k);
    out.tensor("erf.swt", erf_map({SwLayer{lay.cfg, lay.weights, lay.plan}}, 31));
  }
  CostSetup t;
  t.seed = rc.seed;
  out.text("cost_forms.csv", cost_table_csv(cost_table_rows(t), t.N));
  {
    const auto rep = count_arch(ArchSpec::sw_tiny(), 224);
    CsvWriter csv({"layer", "params", "macs"});
    for (const auto& r : rep.rows) csv.row({r.layer, std::to_string(r.params), std::to_string(r.macs)});
    csv.row({"TOTAL", std::to_string(rep.total_params()), std::to_string(rep.total_macs())});
    out.text("params.csv", csv.str());
  }
  {
    CoverageQuery q;
    q.seeds.clear();
    for (std::size_t i = 0; i < 5; ++i) q.seeds.push_back(derive_key({rc.seed, i}));
    CsvWriter csv({"policy", "E", "mean_utilization"});
    for (auto pol : {OrderPolicy::ordered, OrderPolicy::per_edge_shuffled})
      for (std::size_t e : {1, 2, 4, 8}) {
        q.policy = pol;
        q.E = e;
        csv.row({to_string(pol), std::to_string(e), format_real(coverage_ratio(q).mean)});
      }
    out.text("coverage.csv", csv.str());
  }
  res.checks.push_back(timed_check("strip_equivalence", [&](CheckResult& r) {
    r.tol = 1e-10;
    for (std::size_t i = 0; i < strips.size(); ++i) {
      const std::string p = "strip/case" + std::to_string(i) + "_";
      record(r, max_abs_diff(read_container<double>((out.root() / (p + "sw.swt")).string()),
                             read_container<double>((out.root() / (p + "strip_ref.swt")).string())));
    }
  }));
  out.text("MANIFEST.csv", cli_detail::manifest_csv(out));
  res.human = cli_detail::human_checks(res.checks);
  return res;
}

// ---------------------------------------------------------------------------
// Entry point.

inline nlohmann::ordered_json summary_json(const RunConfig& rc, const CommandOutput& res, int code,
                                           const std::vector<std::string>& files) {
  nlohmann::ordered_json j;
  j["tool"] = "swconv_cli";
  j["version"] = kToolVersion;
  j["command"] = rc.subcommand;
  j["status"] = code == 0 ? "pass" : code == 1 ? "fail" : "error";
  j["exit_code"] = code;
  j["seed"] = rc.seed;
  j["dtype"] = rc.dtype;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : res.checks)
    j["checks"].push_back({{"name", c.name},
                           {"status", c.passed ? "PASS" : "FAIL"},
                           {"cases", c.cases},
                           {"max_diff", format_real(c.max_diff)},
                           {"tol", format_real(c.tol)},
                           {"note", c.note}});
  j["files"] = files;
  j["details"] = res.extra;
  return j;
}

/// Parses argv, runs the subcommand and writes summary.json. Returns the
/// process exit status. `out`/`err` receive human-readable text.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Shiftwise convolution lab: verification, analytics, simulation, benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  RunConfig rc;
  VerifyOptions vo;
  CoverageOptions co;
  ErfOptions eo;
  ParamsOptions po;
  PruneOptions pr;
  BenchCliOptions bo;
  double tol = 0;

  auto common = [&](CLI::App* s, const char* spec_help) {
    s->add_option("--spec", rc.spec, spec_help)->check(CLI::ExistingFile);
    s->add_option("--input", rc.inputs, "tensor input paths (SWT1)")->check(CLI::ExistingFile);
    s->add_option("--out", rc.out, "output directory")->capture_default_str();
    s->add_option("--seed", rc.seed, "random seed")->capture_default_str();
    s->add_option("--dtype", rc.dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
    s->add_option("--tol", tol, "tolerance override for the main comparison");
    s->add_option("--threads", rc.threads, "worker threads (0: SW_NUM_THREADS or all cores)")->capture_default_str();
    s->add_flag("--force", rc.force, "overwrite existing output files");
  };

  auto* verify = app.add_subcommand("verify", "equivalence, interior-band, densify, fold and merge suites");
  common(verify, "operator spec (key=value); omitted: built-in random sweep");
  verify->add_option("--trials", vo.trials, "sweep size")->capture_default_str();
  verify->add_option("--weights", vo.weights, "weight directory for --spec")->check(CLI::ExistingDirectory);
  verify->add_option("--H", vo.H, "input height for --spec")->capture_default_str();
  verify->add_option("--W", vo.W, "input width for --spec")->capture_default_str();

  auto* coverage = app.add_subcommand("coverage", "fan-out map utilization vs edges");
  common(coverage, "operator spec supplying M and N");
  coverage->add_option("--M", co.M)->capture_default_str();
  coverage->add_option("--N", co.N)->capture_default_str();
  coverage->add_option("--sizes", co.sizes, "comma-separated H (=W) values")->capture_default_str();
  coverage->add_option("--edges", co.edges, "comma-separated E values")->capture_default_str();
  coverage->add_option("--seeds", co.seeds)->capture_default_str();
  coverage->add_option("--channels", co.channels)->capture_default_str();
  coverage->add_option("--policies", co.policies)->capture_default_str();

  auto* erf = app.add_subcommand("erf", "effective receptive field of a single-channel stack");
  common(erf, "operator spec (C and G are overridden to 1 and 0)");
  erf->add_option("--probe", eo.probe, "odd probe size")->capture_default_str();
  erf->add_option("--layers", eo.layers, "stacked operators")->capture_default_str();
  erf->add_flag("--pgm", eo.pgm, "also write erf.pgm");

  auto* params = app.add_subcommand("params", "parameter and MAC counts");
  common(params, "architecture spec (key=value)");
  params->add_option("--preset", po.preset, "tiny or small when --spec is absent")->capture_default_str();
  params->add_option("--input-size", po.input)->capture_default_str();

  auto* prune = app.add_subcommand("prune-sim", "prune-and-grow mask dynamics");
  common(prune, "architecture spec (key=value)");
  prune->add_option("--preset", pr.preset)->capture_default_str();
  prune->add_option("--steps", pr.steps)->capture_default_str();
  prune->add_option("--sparsity", pr.s)->capture_default_str();
  prune->add_option("--update-every", pr.u)->capture_default_str();
  prune->add_option("--share-gap", pr.gap)->capture_default_str();
  prune->add_option("--policy", pr.policy, "shared|branch_mean_init|subset")->capture_default_str();
  prune->add_option("--init", pr.init, "uniform|sum_then_prune|branch_mean_init|subset")->capture_default_str();
  prune->add_option("--grow", pr.grow, "uniform|adversarial|persistent")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "implementation variants, timing and instrumentation");
  common(bench, "operator spec; omitted: desk default");
  bench->add_option("--H", bo.H)->capture_default_str();
  bench->add_option("--W", bo.W)->capture_default_str();
  bench->add_option("--reps", bo.reps)->capture_default_str();
  bench->add_option("--variants", bo.variants)->capture_default_str();
  bench->add_option("--tile-rows", bo.tile_rows, "0: autoprobe")->capture_default_str();
  bench->add_flag("--relaxed", bo.relaxed, "also run the unordered parallel merge");
  bench->add_option("--densities", bo.densities)->capture_default_str();

  auto* golden = app.add_subcommand("gen-golden", "freeze f64 regression artifacts");
  common(golden, "unused");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e, out, err) == 0) return 0;
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }
  rc.subcommand = app.get_subcommands().front()->get_name();
  if (app.get_subcommands().front()->count("--tol")) rc.tol = tol;
  if (!rc.inputs.empty() && rc.subcommand != "verify")
    err << "note: --input is only used by verify --spec\n";

  CommandOutput res;
  int code = 0;
  std::vector<std::string> files;
  try {
    OutDir dir(rc.out, rc.force);
    if (rc.subcommand == "verify") res = cmd_verify(rc, vo, dir);
    else if (rc.subcommand == "coverage") res = cmd_coverage(rc, co, dir);
    else if (rc.subcommand == "erf") res = cmd_erf(rc, eo, dir);
    else if (rc.subcommand == "params") res = cmd_params(rc, po, dir);
    else if (rc.subcommand == "prune-sim") res = cmd_prune_sim(rc, pr, dir);
    else if (rc.subcommand == "bench") res = cmd_bench(rc, bo, dir);
    else if (rc.subcommand == "gen-golden") res = cmd_gen_golden(rc, dir);
    code = res.passed() ? 0 : 1;
    files = dir.files();
    files.push_back("summary.json");
    dir.text("summary.json", summary_json(rc, res, code, files).dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    // Error summary, unless that would replace an earlier one without --force.
    try {
      const auto path = std::filesystem::path(rc.out) / "summary.json";
      if (rc.force || !std::filesystem::exists(path)) {
        res.checks.clear();
        res.extra = {{"error", e.what()}};
        write_text_file(path, summary_json(rc, res, 2, {"summary.json"}).dump(2) + "\n", true);
      }
    } catch (const std::exception&) {
    }
    return 2;
  }
  out << res.human;
  for (const auto& c : res.checks)
    if (!c.passed) err << "failed check: " << c.name << (c.note.empty() ? "" : " (" + c.note + ")") << "\n";
  out << (code == 0 ? "OK" : "FAILED") << " (" << rc.subcommand << ", outputs in " << rc.out << ")\n";
  return code;
}

}  // namespace swconv
