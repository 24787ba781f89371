// Copyright 2026 The pickle-sentry Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS-IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance suite. Each criterion prints one PASS or FAIL line; the exit
// status is nonzero when any criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "disasm_oracle.hpp"
#include "pickle_sentry/corpus.hpp"
#include "pickle_sentry/decompiler.hpp"
#include "pickle_sentry/mlcore.hpp"
#include "pickle_sentry/scan.hpp"
#include "process_guard.h"

namespace ps = pickle_sentry;
namespace pc = pickle_sentry::corpus;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string pct(std::size_t num, std::size_t den) {
  return fmt(den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den)) + "%";
}

// --- shared state ---

struct Split {
  ps::LabeledCorpus train;
  ps::LabeledCorpus test;
};

struct Context {
  fs::path workdir;
  fs::path oracle;
  fs::path corpus_dir;
  std::vector<pc::ManifestRow> rows;
  ps::LabeledCorpus base;
  Split split;
};

// Fisher-Yates over mt19937_64, per class, 70% of each class to training.
Split stratified_split(const ps::LabeledCorpus& corpus, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Split out;
  for (auto label : {ps::Label::kBenign, ps::Label::kMalicious}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus[i].label == label) idx.push_back(i);
    }
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[rng() % i]);
    }
    std::size_t n_train = (idx.size() * 7 + 5) / 10;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < n_train ? out.train : out.test).push_back(corpus[idx[i]]);
    }
  }
  return out;
}

ps::LabeledCorpus benign_only(const ps::LabeledCorpus& corpus) {
  ps::LabeledCorpus out;
  for (const auto& s : corpus) {
    if (s.label == ps::Label::kBenign) out.push_back(s);
  }
  return out;
}

ps::ForestConfig forest_config() {
  ps::ForestConfig cfg;
  cfg.seed = 0;
  return cfg;
}

// --- criteria ---

Outcome disasm_oracle(Context& ctx) {
  auto start = Clock::now();
  auto cases = ps::testing::load_oracle(ctx.oracle);
  std::set<std::string> graphs;
  std::set<int> protocols;
  std::size_t mismatches = 0;
  std::string first;
  for (const auto& c : cases) {
    if (c.id.starts_with("graph-")) graphs.insert(c.id);
    protocols.insert(c.protocol);
    if (auto diff = ps::testing::compare_with_oracle(c)) {
      if (mismatches++ == 0) first = *diff;
    }
  }
  double elapsed = seconds_since(start);
  bool all_protocols = std::all_of(std::begin({0, 1, 2, 3, 4, 5}), std::end({0, 1, 2, 3, 4, 5}),
                                   [&](int p) { return protocols.contains(p); });
  Outcome o;
  o.pass = graphs.size() >= 1000 && all_protocols && mismatches == 0 && elapsed < 60.0;
  o.detail = std::to_string(cases.size()) + " streams from " + std::to_string(graphs.size()) +
             " graphs at protocols 0-5, " + std::to_string(mismatches) + " mismatches, " +
             fmt(elapsed, 1) + " s (need >= 1000 graphs, 0 mismatches, < 60 s)";
  if (!first.empty()) o.detail += "; first: " + first;
  return o;
}

Outcome robustness(Context& ctx) {
  ps::ScanOptions opts;
  opts.model = std::make_shared<const ps::TrainedModel>(
      ps::train_random_forest(ctx.base, forest_config()));
  opts.ml_only = true;
  std::map<std::string, std::size_t> detected;
  std::map<std::string, std::size_t> total;
  std::size_t score_mismatches = 0;
  std::size_t bases = 0;
  std::optional<double> base_score;
  std::string first;
  for (const auto& row : ctx.rows) {
    if (row.label != ps::Label::kMalicious) continue;
    auto report = ps::scan_file(ctx.corpus_dir / row.path, opts);
    std::optional<double> score;
    if (report.candidates.size() == 1) score = report.candidates[0].ml_score;
    if (row.wrap_chain == "none") {
      ++bases;
      base_score = score;
      continue;
    }
    ++total[row.wrap_chain];
    if (report.file_verdict == ps::Verdict::kMalicious) ++detected[row.wrap_chain];
    bool same = score && base_score &&
                std::bit_cast<std::uint64_t>(*score) == std::bit_cast<std::uint64_t>(*base_score);
    if (!same && score_mismatches++ == 0) first = row.path;
  }
  Outcome o;
  o.pass = total.size() == pc::wrap_paths().size() && score_mismatches == 0;
  std::string per_path;
  for (const auto& path : pc::wrap_paths()) {
    o.pass = o.pass && detected[path] == total[path] && total[path] == bases;
    per_path += " " + path + " " + std::to_string(detected[path]) + "/" + std::to_string(total[path]);
  }
  o.detail = std::to_string(bases) + " malicious bases, detected per path:" + per_path + "; " +
             std::to_string(score_mismatches) + " score mismatches";
  if (!first.empty()) o.detail += " (first " + first + ")";
  return o;
}

Outcome desk_scale(Context& ctx) {
  auto model = ps::train_random_forest(ctx.split.train, forest_config());
  auto m = ps::evaluate(model, ctx.split.test);
  Outcome o;
  o.pass = m.f1 >= 0.95;
  o.detail = "train " + std::to_string(ctx.split.train.size()) + ", test " +
             std::to_string(ctx.split.test.size()) + ": TP " + std::to_string(m.tp) + " TN " +
             std::to_string(m.tn) + " FP " + std::to_string(m.fp) + " FN " +
             std::to_string(m.fn) + ", F1 " + fmt(m.f1, 4) + " (need >= 0.95)";
  return o;
}

Outcome unsupervised(Context& ctx) {
  auto train = benign_only(ctx.split.train);
  auto held_out = benign_only(ctx.split.test);
  ps::LabeledCorpus exploits;
  for (const auto& s : ctx.base) {
    if (s.label == ps::Label::kMalicious) exploits.push_back(s);
  }
  ps::IsolationForestConfig icfg;
  icfg.seed = 0;
  ps::LofConfig lcfg;
  lcfg.seed = 0;
  const std::pair<std::string, ps::TrainedModel> models[] = {
      {"isolation-forest", ps::train_isolation_forest(train, icfg)},
      {"lof", ps::train_lof(train, lcfg)}};
  Outcome o;
  o.pass = true;
  for (const auto& [name, model] : models) {
    auto flagged = [&](const ps::LabeledCorpus& c) {
      std::size_t n = 0;
      for (const auto& s : c) n += ps::predict(model, s.vector).verdict == ps::Label::kMalicious;
      return n;
    };
    std::size_t tp = flagged(exploits);
    std::size_t fp = flagged(held_out);
    bool ok = 10 * tp >= 8 * exploits.size() && 10 * fp <= held_out.size();
    o.pass = o.pass && ok;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += name + " flags " + pct(tp, exploits.size()) + " of " +
                std::to_string(exploits.size()) + " exploits, " + pct(fp, held_out.size()) +
                " of " + std::to_string(held_out.size()) + " held-out benign";
  }
  o.detail += " (need >= 80% and <= 10%)";
  return o;
}

// Roughly 1 MiB of small containers and scalars, the densest opcode mix
// the pickler produces.
std::string dense_pickle() {
  using V = pc::ValuePtr;
  auto mk = [](auto v) { return std::make_shared<const pc::Value>(pc::Value{std::move(v)}); };
  std::mt19937_64 rng(0);
  std::vector<V> rows;
  std::string out;
  std::size_t approx = 0;
  while (approx < (1u << 20)) {
    pc::Dict d;
    d.items.push_back({mk(pc::Str{"id"}), mk(static_cast<std::int64_t>(rng() % 100000))});
    d.items.push_back({mk(pc::Str{"w"}), mk(static_cast<double>(rng() % 1000) / 7.0)});
    d.items.push_back({mk(pc::Str{"tag"}), mk(pc::Str{"t" + std::to_string(rng() % 50)})});
    d.items.push_back({mk(pc::Str{"ok"}), mk(rng() % 2 == 0)});
    pc::List l;
    for (int i = 0; i < 4; ++i) l.items.push_back(mk(static_cast<std::int64_t>(rng() % 300)));
    d.items.push_back({mk(pc::Str{"v"}), mk(pc::Tuple{l.items})});
    rows.push_back(mk(std::move(d)));
    approx += 64;
    if (rows.size() % 2048 == 0) {
      out = pc::dumps(mk(pc::List{rows}), 4);
      approx = out.size();
    }
  }
  out = pc::dumps(mk(pc::List{rows}), 4);
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.size() % 2 == 1 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

Outcome runtime(Context& ctx) {
  auto model = ps::train_random_forest(ctx.base, forest_config());
  const std::string data = dense_pickle();
  std::vector<double> total_ms, infer_ms;
  std::uint64_t opcodes = 0;
  double sink = 0.0;
  for (int run = 0; run < 31; ++run) {
    auto t0 = Clock::now();
    auto v = ps::extract(ps::count_opcodes(data));
    auto t1 = Clock::now();
    auto p = ps::predict(model, v);
    auto t2 = Clock::now();
    sink += p.score;
    opcodes = v.total_opcodes;
    total_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t0).count());
    infer_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
  }
  double total = median(total_ms);
  double infer = median(infer_ms);
  Outcome o;
  o.pass = total < 5.0 && infer < 1.0 && std::isfinite(sink);
  o.detail = std::to_string(data.size()) + "-byte pickle, " + std::to_string(opcodes) +
             " opcodes: median extraction+inference " + fmt(total, 3) + " ms (need < 5), inference " +
             fmt(infer, 4) + " ms (need < 1), single thread";
  return o;
}

std::set<std::string> mapped_objects() {
  std::set<std::string> out;
  std::ifstream maps("/proc/self/maps");
  std::string line;
  while (std::getline(maps, line)) {
    auto slash = line.find('/');
    if (slash != std::string::npos) out.insert(line.substr(slash));
  }
  return out;
}

Outcome safety(Context& ctx) {
  auto before = mapped_objects();
  ps::ScanOptions opts;
  opts.model = std::make_shared<const ps::TrainedModel>(
      ps::train_random_forest(ctx.base, forest_config()));
  std::size_t files = 0, malicious = 0, decompiled = 0;
  for (const auto& row : ctx.rows) {
    if (row.label != ps::Label::kMalicious) continue;
    auto report = ps::scan_file(ctx.corpus_dir / row.path, opts);
    ++files;
    malicious += report.file_verdict == ps::Verdict::kMalicious;
    if (row.wrap_chain == "none") {
      std::ifstream in(ctx.corpus_dir / row.path, std::ios::binary);
      std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      for (const auto& c : ps::unwrap(data).candidates) {
        for (const auto& d : ps::disassemble_all(*c.bytes)) {
          if (!d.events.empty()) decompiled += !ps::decompile(d).text().empty();
        }
      }
    }
  }
  auto after = mapped_objects();
  std::size_t new_objects = 0;
  for (const auto& m : after) new_objects += !before.contains(m);
  int violations = ps_guard_violations();
  Outcome o;
  o.pass = violations == 0 && new_objects == 0 && files > 0;
  o.detail = "scanned " + std::to_string(files) + " malicious files (" + std::to_string(malicious) +
             " flagged), decompiled " + std::to_string(decompiled) + " payloads; " +
             std::to_string(violations) + " blocked process/loader calls over the whole run" +
             (violations ? std::string(" (last ") + ps_guard_last() + ")" : std::string()) + ", " +
             std::to_string(new_objects) + " newly mapped objects";
  return o;
}

// True when `d` is the double nearest to num/den (ties to even).
bool correctly_rounded(double d, std::uint64_t num, std::uint64_t den) {
  if (den == 0) return d == 0.0;
  if (num == 0) return d == 0.0;
  if (!(d > 0.0) || !std::isfinite(d)) return false;
  using I = __int128;
  // |num/den - x| * den * 2^s as an integer, x = m * 2^e.
  auto scaled_error = [&](double x, int s) {
    int e = 0;
    double frac = std::frexp(x, &e);
    auto m = static_cast<std::int64_t>(std::ldexp(frac, 53));
    e -= 53;
    I lhs = static_cast<I>(num) << s;
    I rhs = static_cast<I>(m) * static_cast<I>(den);
    int shift = e + s;
    rhs = shift >= 0 ? rhs << shift : rhs >> -shift;
    I diff = lhs - rhs;
    return diff < 0 ? -diff : diff;
  };
  int e = 0;
  std::frexp(d, &e);
  // Every neighbour's exponent is >= e - 54, so a shift of 54 - e keeps
  // the right-hand side integral.
  int s = 54 - e + 1;
  if (s < 0 || s > 100) return false;
  I here = scaled_error(d, s);
  for (double n : {std::nextafter(d, 0.0), std::nextafter(d, 2.0)}) {
    I there = scaled_error(n, s);
    if (there < here) return false;
    if (there == here) {
      int ignored = 0;
      auto mant = static_cast<std::int64_t>(std::ldexp(std::frexp(d, &ignored), 53));
      if (mant % 2 != 0) return false;
    }
  }
  return true;
}

Outcome metrics_identities(Context&) {
  std::mt19937_64 rng(0);
  std::size_t checked = 0, wrong = 0;
  std::string first;
  for (int i = 0; i < 50; ++i) {
    auto draw = [&] {
      switch (rng() % 8) {
        case 0: return std::uint64_t{0};
        case 1: return rng() % 10;
        default: return rng() % 1000000;
      }
    };
    std::uint64_t tp = draw(), tn = draw(), fp = draw(), fn = draw();
    auto m = ps::metrics_from_counts(tp, tn, fp, fn);
    bool ok = m.tp == tp && m.tn == tn && m.fp == fp && m.fn == fn &&
              correctly_rounded(m.precision, tp, tp + fp) &&
              correctly_rounded(m.recall, tp, tp + fn) &&
              correctly_rounded(m.tp_rate, tp, tp + fn) &&
              correctly_rounded(m.tn_rate, tn, tn + fp) &&
              correctly_rounded(m.f1, 2 * tp, 2 * tp + fp + fn);
    ++checked;
    if (!ok && wrong++ == 0) {
      first = std::to_string(tp) + "/" + std::to_string(tn) + "/" + std::to_string(fp) + "/" +
              std::to_string(fn);
    }
  }
  Outcome o;
  o.pass = checked == 50 && wrong == 0;
  o.detail = std::to_string(checked) +
             " random confusion matrices, precision/recall/F1/TN rate equal to the correctly "
             "rounded closed forms in " +
             std::to_string(checked - wrong) + " cases";
  if (!first.empty()) o.detail += "; first failure tp/tn/fp/fn " + first;
  return o;
}

Outcome persistence(Context& ctx) {
  auto dir = ctx.workdir / "models";
  fs::create_directories(dir);
  auto benign = benign_only(ctx.split.train);
  ps::IsolationForestConfig icfg;
  ps::LofConfig lcfg;
  const ps::TrainedModel models[] = {ps::train_random_forest(ctx.split.train, forest_config()),
                                     ps::train_isolation_forest(benign, icfg),
                                     ps::train_lof(benign, lcfg)};
  std::vector<const ps::FeatureVector*> queries;
  for (const auto& s : ctx.split.test) {
    if (queries.size() < 100) queries.push_back(&s.vector);
  }
  Outcome o;
  o.pass = queries.size() == 100;
  for (const auto& m : models) {
    auto path = dir / (std::string(ps::to_string(m.kind)) + ".json");
    ps::save_model(m, path);
    auto back = ps::load_model(path, m.kind);
    std::size_t equal = 0;
    for (const auto* q : queries) {
      auto a = ps::predict(m, *q);
      auto b = ps::predict(back, *q);
      equal += std::bit_cast<std::uint64_t>(a.score) == std::bit_cast<std::uint64_t>(b.score) &&
               a.verdict == b.verdict;
    }
    o.pass = o.pass && equal == queries.size() && back == m;
    if (!o.detail.empty()) o.detail += ", ";
    o.detail += std::string(ps::to_string(m.kind)) + " " + std::to_string(equal) + "/" +
                std::to_string(queries.size());
  }
  o.detail = "bitwise-equal scores after save/load: " + o.detail;
  return o;
}

// Optional comparison against an externally obtained curated dataset;
// reported but never counted.
void curated_check(const fs::path& manifest) {
  try {
    auto corpus = pc::load_corpus(manifest);
    auto split = stratified_split(corpus, 0);
    auto m = ps::evaluate(ps::train_random_forest(split.train, forest_config()), split.test);
    bool within = std::abs(100.0 * m.f1 - 90.01) <= 5.0;
    std::cout << "INFO curated-dataset: F1 " << fmt(100.0 * m.f1) << " vs 90.01 reference, "
              << (within ? "within" : "outside") << " 5 points (not gating)\n";
  } catch (const std::exception& e) {
    std::cout << "INFO curated-dataset: not evaluated: " << e.what() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pickle-sentry acceptance suite"};
  Context ctx;
  std::string only;
  std::string curated;
  app.add_option("--oracle", ctx.oracle, "Reference disassembly JSONL")->required();
  app.add_option("--workdir", ctx.workdir, "Scratch directory")->required();
  app.add_option("--only", only, "Run a single criterion");
  app.add_option("--curated", curated, "Manifest of a curated dataset (optional, not gating)");
  CLI11_PARSE(app, argc, argv);

  auto setup_start = Clock::now();
  ctx.corpus_dir = ctx.workdir / "corpus";
  fs::remove_all(ctx.corpus_dir);
  auto spec = pc::GenSpec::defaults();
  spec.seed = 0;
  ctx.rows = pc::generate(spec, ctx.corpus_dir);
  ctx.base = pc::load_corpus(ctx.corpus_dir / "manifest.csv");
  ctx.split = stratified_split(ctx.base, 0);
  std::cout << "corpus: " << spec.n_benign << " benign + " << spec.n_malicious
            << " malicious bases, " << ctx.rows.size() << " files, seed 0 ("
            << fmt(seconds_since(setup_start), 1) << " s)\n";

  const std::pair<std::string, std::function<Outcome(Context&)>> criteria[] = {
      {"disasm-oracle", disasm_oracle},
      {"loading-path-robustness", robustness},
      {"desk-scale-f1", desk_scale},
      {"unsupervised-sanity", unsupervised},
      {"runtime", runtime},
      {"metrics-identities", metrics_identities},
      {"model-persistence", persistence},
      {"safety", safety}};
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && only != name) continue;
    Outcome o;
    try {
      o = fn(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  if (!curated.empty()) curated_check(curated);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << "\n";
  return failures == 0 ? 0 : 1;
}
