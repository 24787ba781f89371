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

// pickle-sentry: static scanner for pickle-based model files.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "parallel.hpp"
#include "pickle_sentry/corpus.hpp"
#include "pickle_sentry/decompiler.hpp"
#include "pickle_sentry/disasm.hpp"
#include "pickle_sentry/error.hpp"
#include "pickle_sentry/features.hpp"
#include "pickle_sentry/mlcore.hpp"
#include "pickle_sentry/policy.hpp"
#include "pickle_sentry/scan.hpp"
#include "pickle_sentry/unwrap.hpp"

namespace fs = std::filesystem;
namespace ps = pickle_sentry;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFlagged = 1;
constexpr int kExitError = 2;
constexpr int kExitUsage = 64;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ps::Error(ps::ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", rate * 100.0);
  return buf;
}

std::string millis(double ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", ms);
  return buf;
}

// Regular files under each argument, directories walked in path order.
std::vector<fs::path> expand(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& input : inputs) {
    fs::path root(input);
    if (!fs::is_directory(root)) {
      out.push_back(root);
      continue;
    }
    std::vector<fs::path> found;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_regular_file()) found.push_back(entry.path());
    }
    std::sort(found.begin(), found.end(),
              [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

struct Common {
  std::string model_path;
  std::string policy_path;
  std::uint32_t max_depth = ps::UnwrapLimits{}.max_depth;
  unsigned jobs = 0;
  std::uint64_t seed = 0;
};

ps::UnwrapLimits limits_of(const Common& c) {
  ps::UnwrapLimits limits;
  limits.max_depth = c.max_depth;
  return limits;
}

std::string imports_text(const std::vector<ps::ImportPair>& imports) {
  std::string out;
  for (const auto& i : imports) {
    if (!out.empty()) out += ',';
    out += i.module + "." + i.name;
  }
  return out.empty() ? "-" : out;
}

void print_report(std::ostream& out, const ps::ScanReport& r) {
  out << r.path << ": " << ps::to_string(r.file_verdict) << " (" << r.candidates.size()
      << " candidates, " << millis(r.elapsed_ms) << " ms)\n";
  if (r.error) out << "  error: " << *r.error << '\n';
  for (const auto& c : r.candidates) {
    out << "  " << (c.origin_chain.empty() ? "[raw]" : ps::format_origin_chain(c.origin_chain))
        << " rule=" << ps::to_string(c.rule_verdict);
    if (c.ml_verdict) {
      char score[32];
      std::snprintf(score, sizeof score, "%.4f", *c.ml_score);
      out << " ml=" << ps::to_string(*c.ml_verdict) << " score=" << score;
    }
    if (!c.well_formed) out << " malformed";
    if (c.oov_mass > 0.0) out << " oov=" << c.oov_mass;
    out << " imports=" << imports_text(c.imports) << '\n';
    if (c.error) out << "    error: " << *c.error << '\n';
  }
  for (const auto& i : r.issues) out << "  issue " << ps::to_string(i.code) << ": " << i.message << '\n';
}

int cmd_scan(const Common& common, const std::vector<std::string>& paths, bool ml_only, bool json) {
  ps::ScanOptions options;
  if (!common.model_path.empty()) {
    options.model = std::make_shared<const ps::TrainedModel>(ps::load_model(common.model_path));
  }
  if (!common.policy_path.empty()) options.policy = ps::load_policy(common.policy_path);
  options.limits = limits_of(common);
  options.ml_only = ml_only;
  options.jobs = common.jobs;
  if (ml_only && !options.model) {
    throw ps::Error(ps::ErrorCode::kInvalidArgument, "--ml-only needs a model");
  }

  bool flagged = false;
  bool failed = false;
  for (const auto& p : paths) {
    for (const auto& report : ps::scan_tree(p, options)) {
      if (json) {
        std::cout << ps::to_json_line(report) << '\n';
      } else {
        print_report(std::cout, report);
      }
      flagged |= report.file_verdict == ps::Verdict::kMalicious ||
                 report.file_verdict == ps::Verdict::kSuspicious;
      failed |= report.file_verdict == ps::Verdict::kScanError;
    }
  }
  if (flagged) return kExitFlagged;
  return failed ? kExitError : kExitOk;
}

ps::LabeledCorpus benign_only(ps::LabeledCorpus corpus) {
  std::erase_if(corpus, [](const ps::LabeledSample& s) { return s.label != ps::Label::kBenign; });
  return corpus;
}

int cmd_train(const Common& common, const std::string& kind_text, const std::string& manifest,
              const std::string& out, std::size_t trees, bool include_wrapped) {
  auto kind = ps::parse_model_kind(kind_text);
  if (!kind) throw ps::Error(ps::ErrorCode::kInvalidArgument, "unknown model kind '" + kind_text + "'");
  ps::corpus::CorpusLoadOptions load;
  load.include_wrapped = include_wrapped;
  load.limits = limits_of(common);
  load.jobs = common.jobs;
  auto corpus = ps::corpus::load_corpus(manifest, load);

  ps::TrainedModel model;
  switch (*kind) {
    case ps::ModelKind::kRandomForest:
    {
      ps::ForestConfig config;
      config.n_trees = trees;
      config.seed = common.seed;
      config.threads = common.jobs;
      model = ps::train_random_forest(corpus, config);
      break;
    }
    case ps::ModelKind::kIsolationForest:
      corpus = benign_only(std::move(corpus));
      {
        ps::IsolationForestConfig config;
        config.n_trees = trees;
        config.seed = common.seed;
        model = ps::train_isolation_forest(corpus, config);
      }
      break;
    case ps::ModelKind::kLof:
      corpus = benign_only(std::move(corpus));
      {
        ps::LofConfig config;
        config.seed = common.seed;
        model = ps::train_lof(corpus, config);
      }
      break;
  }
  ps::save_model(model, out);
  std::cout << "trained " << ps::to_string(model.kind) << " on " << corpus.size() << " samples ("
            << model.projection.kept_indices.size() << " opcode dimensions) -> " << out << '\n';
  return kExitOk;
}

int cmd_eval(const Common& common, const std::string& manifest, bool include_wrapped) {
  if (common.model_path.empty()) throw ps::Error(ps::ErrorCode::kInvalidArgument, "--model is required");
  auto model = ps::load_model(common.model_path);
  ps::corpus::CorpusLoadOptions load;
  load.include_wrapped = include_wrapped;
  load.limits = limits_of(common);
  load.jobs = common.jobs;
  auto corpus = ps::corpus::load_corpus(manifest, load);
  auto m = ps::evaluate(model, corpus);
  std::cout << "model " << ps::to_string(model.kind) << '\n'
            << "samples " << corpus.size() << '\n'
            << "TP " << m.tp << '\n'
            << "TN " << m.tn << '\n'
            << "FP " << m.fp << '\n'
            << "FN " << m.fn << '\n'
            << "TP% " << percent(m.tp_rate) << '\n'
            << "TN% " << percent(m.tn_rate) << '\n'
            << "Precision " << percent(m.precision) << '\n'
            << "Recall " << percent(m.recall) << '\n'
            << "F1 " << percent(m.f1) << '\n';
  return kExitOk;
}

// Bare pickles are decoded as-is; containers are unwrapped first and each
// candidate is printed under its origin.
template <typename Fn>
int for_each_stream(const Common& common, const std::string& path, Fn&& fn) {
  std::string data = read_file(path);
  if (data.empty()) throw ps::Error(ps::ErrorCode::kEmptyInput, path + " is empty");
  // Shorter inputs cannot carry container magic.
  constexpr std::size_t kMinSniffBytes = 6;
  if (data.size() < kMinSniffBytes || ps::sniff(data) == ps::ContainerKind::kRaw) {
    fn(std::string_view(data));
    return kExitOk;
  }
  auto u = ps::unwrap(data, limits_of(common));
  for (const auto& c : u.candidates) {
    std::cout << "# " << ps::format_origin_chain(c.origin_chain) << '\n';
    fn(std::string_view(*c.bytes));
  }
  for (const auto& issue : u.issues()) {
    std::cerr << "warning: " << ps::to_string(issue.code) << ": " << issue.message << '\n';
  }
  return u.candidates.empty() ? kExitError : kExitOk;
}

int cmd_disasm(const Common& common, const std::string& path) {
  bool malformed = false;
  int rc = for_each_stream(common, path, [&](std::string_view bytes) {
    auto segments = ps::disassemble_all(bytes);
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const auto& d = segments[s];
      if (s > 0) std::cout << "# segment " << s << '\n';
      for (const auto& e : d.events) {
        std::cout << e.offset << ' ' << e.descriptor().mnemonic;
        if (!std::holds_alternative<std::monostate>(e.arg)) std::cout << ' ' << ps::format_arg(e.arg);
        std::cout << '\n';
      }
      if (!d.well_formed) {
        malformed = true;
        std::cout << "# malformed: " << ps::to_string(*d.malform_reason) << " at offset "
                  << d.error_offset << '\n';
      }
    }
  });
  return rc != kExitOk ? rc : (malformed ? kExitFlagged : kExitOk);
}

int cmd_decompile(const Common& common, const std::string& path) {
  return for_each_stream(common, path, [&](std::string_view bytes) {
    auto segments = ps::disassemble_all(bytes);
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (s > 0) std::cout << "# segment " << s << '\n';
      if (segments[s].events.empty()) {
        std::cout << "# no opcodes\n";
        continue;
      }
      std::cout << ps::decompile(segments[s]).text();
    }
  });
}

int cmd_features(const Common& common, const std::vector<std::string>& inputs, const std::string& out) {
  auto files = expand(inputs);
  std::vector<ps::LabeledVector> rows(files.size());
  std::vector<std::string> errors(files.size());
  ps::parallel_for(files.size(), common.jobs, [&](std::size_t i) {
    try {
      rows[i].label = files[i].generic_string();
      rows[i].vector = ps::corpus::file_features(read_file(files[i]), limits_of(common));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::vector<ps::LabeledVector> ok;
  int rc = kExitOk;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (errors[i].empty()) {
      ok.push_back(std::move(rows[i]));
    } else {
      std::cerr << files[i].string() << ": " << errors[i] << '\n';
      rc = kExitError;
    }
  }
  if (out.empty() || out == "-") {
    ps::export_csv(std::cout, ok);
  } else {
    ps::export_csv(fs::path(out), ok);
  }
  return rc;
}

int cmd_gen_corpus(const Common& common, const std::string& spec_path, const std::string& out,
                   std::optional<std::uint64_t> seed_flag) {
  auto spec = spec_path.empty() ? ps::corpus::GenSpec::defaults()
                                : ps::corpus::GenSpec::from_json(read_file(spec_path));
  if (seed_flag) {
    spec.seed = *seed_flag;
  } else if (spec_path.empty()) {
    spec.seed = common.seed;
  }
  auto rows = ps::corpus::generate(spec, out);
  std::size_t malicious = std::count_if(rows.begin(), rows.end(), [](const auto& r) {
    return r.label == ps::Label::kMalicious;
  });
  std::cout << "wrote " << rows.size() << " files (" << rows.size() - malicious << " benign, "
            << malicious << " malicious) and " << (fs::path(out) / "manifest.csv").string() << '\n';
  return kExitOk;
}

struct Stages {
  std::vector<double> unwrap, disasm, features, inference, total;
};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

int cmd_bench(const Common& common, const std::string& manifest, std::size_t repeat) {
  if (common.model_path.empty()) throw ps::Error(ps::ErrorCode::kInvalidArgument, "--model is required");
  auto model = ps::load_model(common.model_path);
  auto rows = ps::corpus::read_manifest(manifest);
  auto base = fs::path(manifest).parent_path();
  auto limits = limits_of(common);
  using Clock = std::chrono::steady_clock;
  auto ms = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };
  Stages st;
  for (const auto& row : rows) {
    std::string data = read_file(base / row.path);
    for (std::size_t r = 0; r < repeat; ++r) {
      auto t0 = Clock::now();
      auto u = ps::unwrap(data, limits);
      auto t1 = Clock::now();
      std::vector<ps::Disassembly> segments;
      for (const auto& c : u.candidates) {
        auto part = ps::disassemble_all(*c.bytes);
        segments.insert(segments.end(), std::make_move_iterator(part.begin()),
                        std::make_move_iterator(part.end()));
      }
      auto t2 = Clock::now();
      auto v = ps::extract(segments);
      auto t3 = Clock::now();
      volatile double score = ps::predict(model, v).score;
      (void)score;
      auto t4 = Clock::now();
      st.unwrap.push_back(ms(t0, t1));
      st.disasm.push_back(ms(t1, t2));
      st.features.push_back(ms(t2, t3));
      st.inference.push_back(ms(t3, t4));
      st.total.push_back(ms(t0, t4));
    }
  }
  std::cout << "model " << ps::to_string(model.kind) << ", " << rows.size() << " files x " << repeat
            << '\n';
  std::cout << "stage median_ms mean_ms\n";
  auto line = [](const char* name, const std::vector<double>& v) {
    std::cout << name << ' ' << millis(median(v)) << ' ' << millis(mean(v)) << '\n';
  };
  line("unwrap", st.unwrap);
  line("disassemble", st.disasm);
  line("features", st.features);
  line("inference", st.inference);
  line("total", st.total);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Static scanner for pickle-based model files"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pickle-sentry 0.1.0");

  Common common;
  auto add_model = [&](CLI::App* cmd) {
    cmd->add_option("--model", common.model_path, "Trained model file")->envname("PICKLE_SENTRY_MODEL");
  };
  auto add_depth = [&](CLI::App* cmd) {
    cmd->add_option("--max-depth", common.max_depth, "Container nesting limit")
        ->envname("PICKLE_SENTRY_MAX_DEPTH")
        ->check(CLI::Range(0u, 64u));
  };
  auto add_jobs = [&](CLI::App* cmd) {
    cmd->add_option("--jobs,-j", common.jobs, "Worker threads (0 = logical cores)")
        ->envname("PICKLE_SENTRY_JOBS");
  };
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", common.seed, "Random seed")->envname("PICKLE_SENTRY_SEED");
  };

  std::vector<std::string> paths;
  bool ml_only = false;
  bool json = false;
  auto* scan = app.add_subcommand("scan", "Scan files or directories");
  scan->add_option("paths", paths, "Files or directories")->required();
  add_model(scan);
  scan->add_flag("--ml-only", ml_only, "Ignore the import rules when deciding malicious");
  scan->add_option("--policy", common.policy_path, "Import policy JSON")->envname("PICKLE_SENTRY_POLICY");
  scan->add_flag("--json", json, "JSON Lines output");
  add_depth(scan);
  add_jobs(scan);

  std::string kind, manifest, out;
  std::size_t trees = 100;
  bool include_wrapped = false;
  auto* train = app.add_subcommand("train", "Train a model on a corpus manifest");
  train->add_option("--kind", kind, "forest, iforest or lof")->required();
  train->add_option("--corpus", manifest, "Corpus manifest.csv")->required();
  train->add_option("--out", out, "Output model file")->required();
  train->add_option("--trees", trees, "Trees for forest kinds")->check(CLI::PositiveNumber);
  train->add_flag("--include-wrapped", include_wrapped, "Also train on wrapped variants");
  add_seed(train);
  add_depth(train);
  add_jobs(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a model on a corpus manifest");
  add_model(eval);
  eval->add_option("--corpus", manifest, "Corpus manifest.csv")->required();
  eval->add_flag("--include-wrapped", include_wrapped, "Also evaluate wrapped variants");
  add_depth(eval);
  add_jobs(eval);

  std::string file;
  auto* disasm = app.add_subcommand("disasm", "Print opcodes, one per line");
  disasm->add_option("file", file)->required();
  add_depth(disasm);

  auto* decompile = app.add_subcommand("decompile", "Print Python-like pseudo-source");
  decompile->add_option("file", file)->required();
  add_depth(decompile);

  auto* features = app.add_subcommand("features", "Export opcode-frequency vectors as CSV");
  features->add_option("paths", paths, "Files or directories")->required();
  features->add_option("--out", out, "CSV file (default stdout)");
  add_depth(features);
  add_jobs(features);

  std::string spec_path;
  std::optional<std::uint64_t> gen_seed;
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic labeled corpus");
  gen->add_option("--spec", spec_path, "Corpus spec JSON (default built-in mix)");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Seed, overriding the spec")->envname("PICKLE_SENTRY_SEED");

  std::size_t repeat = 1;
  auto* bench = app.add_subcommand("bench", "Per-stage timings over a corpus");
  add_model(bench);
  bench->add_option("--corpus", manifest, "Corpus manifest.csv")->required();
  bench->add_option("--repeat", repeat, "Timed runs per file")->check(CLI::PositiveNumber);
  add_depth(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    const auto chosen = app.get_subcommands();
    std::cerr << "usage: pickle-sentry "
              << (chosen.empty() ? std::string("<command>") : chosen.back()->get_name())
              << " [options]\n";
    return kExitUsage;
  }

  try {
    if (*scan) return cmd_scan(common, paths, ml_only, json);
    if (*train) return cmd_train(common, kind, manifest, out, trees, include_wrapped);
    if (*eval) return cmd_eval(common, manifest, include_wrapped);
    if (*disasm) return cmd_disasm(common, file);
    if (*decompile) return cmd_decompile(common, file);
    if (*features) return cmd_features(common, paths, out);
    if (*gen) return cmd_gen_corpus(common, spec_path, out, gen_seed);
    if (*bench) return cmd_bench(common, manifest, repeat);
  } catch (const ps::Error& e) {
    std::cerr << "pickle-sentry: " << e.what() << '\n';
    return e.code() == ps::ErrorCode::kInvalidArgument ? kExitUsage : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "pickle-sentry: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}
