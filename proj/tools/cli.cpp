// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "biasaudit/bench.hpp"
#include "biasaudit/error.hpp"
#include "biasaudit/methodlib.hpp"
#include "biasaudit/severity.hpp"
#include "biasaudit/synthgen.hpp"

#ifndef BIASAUDIT_DEFAULT_LIBRARY
#define BIASAUDIT_DEFAULT_LIBRARY ""
#endif

namespace biasaudit::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void invalid(const std::string& msg) { throw Error(Errc::InvalidArgument, msg); }

bool looks_secret(std::string_view key) {
  std::string k(key);
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (k == "api_key_env") return false;
  return k.find("key") != std::string::npos || k.find("token") != std::string::npos ||
         k.find("secret") != std::string::npos || k.find("password") != std::string::npos;
}

std::string text_field(const json& j, const char* key) {
  if (!j.at(key).is_string()) invalid(fmt::format("config field \"{}\" must be text", key));
  return j.at(key).get<std::string>();
}

RunMode parse_mode(const std::string& s) {
  if (s == "offline") return RunMode::Offline;
  if (s == "chat") return RunMode::Chat;
  invalid(fmt::format("unknown mode '{}' (expected offline or chat)", s));
}

// Everything a subcommand may take from the command line; unset optionals
// fall back to the config file, then to built-in defaults.
struct Flags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int budget = 64;
  std::string thresholds;
  std::string library;
  std::string mode;
  std::string delimiter = ",";
  std::optional<std::string> na_tokens;
  bool wall_clock = false;
  unsigned jobs = 1;
};

struct Resolved {
  RunMode mode = RunMode::Offline;
  fs::path out;
  std::shared_ptr<const severity::ThresholdTable> thresholds;
  std::shared_ptr<const methodlib::Library> library;
  fs::path library_path;
  orchestrator::ChatConfig chat;
  tabular::CsvOptions csv;
};

char parse_delimiter(const std::string& d) {
  if (d == "tab" || d == "\\t" || d == "\t") return '\t';
  if (d.size() != 1 || d == "\"" || d == "\n" || d == "\r") invalid(fmt::format("delimiter must be one character, got '{}'", d));
  return d[0];
}

fs::path library_path(const Flags& f, const Config& cfg, bool& explicit_path) {
  explicit_path = true;
  if (!f.library.empty()) return f.library;
  if (cfg.library) return *cfg.library;
  if (const char* env = std::getenv("BIASAUDIT_LIBRARY"); env != nullptr && *env != '\0') return env;
  explicit_path = false;
  return BIASAUDIT_DEFAULT_LIBRARY;
}

Resolved resolve(const Flags& f, const std::string& default_out, bool need_library) {
  Config cfg;
  std::string cfg_path = f.config;
  if (cfg_path.empty()) {
    if (const char* env = std::getenv("BIASAUDIT_CONFIG"); env != nullptr) cfg_path = env;
  }
  if (!cfg_path.empty()) cfg = load_config(cfg_path);

  Resolved r;
  r.mode = !f.mode.empty() ? parse_mode(f.mode) : cfg.mode.value_or(RunMode::Offline);
  r.out = !f.out.empty() ? fs::path(f.out) : cfg.out ? fs::path(*cfg.out) : fs::path(default_out);
  r.chat = cfg.chat;
  const std::string thresholds = !f.thresholds.empty() ? f.thresholds : cfg.thresholds.value_or("");
  r.thresholds = std::make_shared<const severity::ThresholdTable>(
      thresholds.empty() ? severity::ThresholdTable::defaults() : severity::load_table(thresholds));
  if (need_library) {
    bool explicit_path = false;
    r.library_path = library_path(f, cfg, explicit_path);
    if (explicit_path || (!r.library_path.empty() && fs::exists(r.library_path))) {
      r.library = std::make_shared<const methodlib::Library>(methodlib::load_library(r.library_path));
    }
  }
  r.csv.delimiter = parse_delimiter(f.delimiter);
  if (f.na_tokens) {
    r.csv.na_tokens.clear();
    std::stringstream ss(*f.na_tokens);
    for (std::string tok; std::getline(ss, tok, ',');) r.csv.na_tokens.insert(tok);
  }
  return r;
}

void add_common(CLI::App* sc, Flags& f) {
  sc->add_option("--config", f.config, "JSON config file (default: $BIASAUDIT_CONFIG)");
  sc->add_option("--out", f.out, "Output directory");
  sc->add_option("--seed", f.seed, "Random seed");
  sc->add_option("--thresholds", f.thresholds, "Threshold table JSON (default: built-in table)");
  sc->add_option("--library", f.library, "Method library JSON");
  sc->add_option("--mode", f.mode, "offline or chat")->check(CLI::IsMember({"offline", "chat"}));
}

void add_session_flags(CLI::App* sc, Flags& f) {
  sc->add_option("--budget", f.budget, "Maximum number of agent actions")->check(CLI::NonNegativeNumber);
  sc->add_option("--delimiter", f.delimiter, "Field delimiter (one character, or 'tab')");
  sc->add_option("--na-tokens", f.na_tokens, "Comma-separated cell values read as missing (replaces the defaults)");
  sc->add_flag("--wall-clock", f.wall_clock, "Record real elapsed time in session logs");
}

std::string default_question(const std::vector<std::string>& features) {
  if (features.empty()) return {};
  if (features.size() == 1) return fmt::format("Is there bias in the distribution of {}?", features[0]);
  return fmt::format("Is there bias between {} and {}?", features[0], features[1]);
}

metrics::StatedBias parse_bias(const std::string& s) {
  std::string l(s);
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l.empty() || l == "unstated" || l == "implication") return metrics::StatedBias::Unstated;
  if (l == "distribution") return metrics::StatedBias::Distribution;
  if (l == "correlation") return metrics::StatedBias::Correlation;
  invalid(fmt::format("unknown bias type '{}' (expected distribution, correlation or implication)", s));
}

struct SessionArgs {
  std::string dataset;
  std::vector<std::string> features;
  std::string question;
  std::string bias_type;
  std::string mediator;
  std::string covariate;
};

void add_session_args(CLI::App* sc, SessionArgs& a) {
  sc->add_option("dataset", a.dataset, "Delimited text file with a header row")->required();
  sc->add_option("-f,--feature", a.features, "Feature to analyse (once or twice; commas allowed)")->delimiter(',');
  sc->add_option("-q,--question", a.question, "The bias question in plain words");
  sc->add_option("--bias-type", a.bias_type, "distribution, correlation or implication");
  sc->add_option("--mediator", a.mediator, "Mediator column for the path-specific effect");
  sc->add_option("--covariate", a.covariate, "Covariate column for the conditional parity metrics");
}

orchestrator::TaskContext make_task(const SessionArgs& a, const Flags& f, const Resolved& r, orchestrator::Mode mode) {
  const auto columns = tabular::list_features(a.dataset, r.csv);
  auto require = [&](const std::string& name, std::string_view role) {
    if (std::find(columns.begin(), columns.end(), name) == columns.end()) {
      throw Error(Errc::UnknownColumn, fmt::format("unknown {} '{}'; columns are: {}", role, name, fmt::join(columns, ", ")));
    }
  };
  if (a.features.size() > 2) invalid("give one or two features");
  for (const auto& name : a.features) require(name, "feature");
  if (!a.mediator.empty()) require(a.mediator, "mediator column");
  if (!a.covariate.empty()) require(a.covariate, "covariate column");

  orchestrator::TaskContext t;
  t.id = fs::path(a.dataset).stem().string();
  t.dataset = a.dataset;
  t.features = a.features;
  t.question = a.question.empty() ? default_question(a.features) : a.question;
  t.stated = parse_bias(a.bias_type);
  if (!a.mediator.empty()) t.mediator = a.mediator;
  if (!a.covariate.empty()) t.covariate = a.covariate;
  t.mode = mode;
  t.csv = r.csv;
  t.metric_options.seed = f.seed;
  return t;
}

struct Agents {
  std::unique_ptr<orchestrator::Planner> planner;
  std::unique_ptr<orchestrator::Advisor> advisor;
};

Agents make_agents(const Resolved& r, const orchestrator::ToolRegistry& registry) {
  if (r.mode == RunMode::Chat) {
    return {std::make_unique<orchestrator::ChatPlanner>(r.chat, registry), std::make_unique<orchestrator::ChatAdvisor>(r.chat)};
  }
  return {std::make_unique<orchestrator::RulePlanner>(), std::make_unique<orchestrator::RuleAdvisor>()};
}

void print_summary(std::ostream& out, const orchestrator::SessionResult& res, const fs::path& dir) {
  const auto& rep = res.report;
  fmt::print(out, "status: {}\n", orchestrator::to_string(res.status));
  if (rep.headline_level > 0) {
    fmt::print(out, "headline: level {} ({})\n", rep.headline_level, rep.headline_label);
  } else {
    fmt::print(out, "headline: none\n");
  }
  fmt::print(out, "report: {}\n", (dir / "report.md").generic_string());
}

int session_command(const SessionArgs& a, const Flags& f, orchestrator::Mode mode, std::istream& in, std::ostream& out,
                    std::ostream& err) {
  const auto r = resolve(f, "biasaudit-out", true);
  auto task = make_task(a, f, r, mode);
  const auto registry = orchestrator::builtin_registry();
  auto agents = make_agents(r, registry);
  orchestrator::StreamInput stream(in, out);
  orchestrator::SessionOptions so;
  so.budget = f.budget;
  so.thresholds = r.thresholds;
  so.library = r.library;
  so.advisor = agents.advisor.get();
  if (mode == orchestrator::Mode::Interactive) so.input = &stream;
  if (f.wall_clock) so.clock = orchestrator::steady_clock_ms();

  const auto res = orchestrator::run_session(std::move(task), *agents.planner, registry, so);
  orchestrator::write_session(res, r.out);
  print_summary(out, res, r.out);
  if (res.error) {
    fmt::print(err, "biasaudit: error: {}\n", res.error_message);
    return kError;
  }
  if (mode == orchestrator::Mode::Interactive) {
    return res.status == orchestrator::SessionStatus::BudgetExhausted ? kIncomplete : kComplete;
  }
  return res.report.complete ? kComplete : kIncomplete;
}

void emit(std::ostream& out, const fs::path& dir, const std::string& file, const std::string& text, bool to_file) {
  out << text;
  if (!to_file) return;
  fs::create_directories(dir);
  std::ofstream f(dir / file, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, fmt::format("cannot write '{}'", (dir / file).string()));
  f << text;
}

std::vector<metrics::Scenario> parse_scenarios(const std::vector<std::string>& names) {
  std::vector<metrics::Scenario> out;
  for (const auto& n : names) {
    const auto s = metrics::scenario_from_string(n);
    if (!s) invalid(fmt::format("unknown scenario '{}' (expected cat_dist, num_dist, cat_cat, cat_num or num_num)", n));
    out.push_back(*s);
  }
  if (out.empty()) {
    out = {metrics::Scenario::CatDist, metrics::Scenario::NumDist, metrics::Scenario::CatCat, metrics::Scenario::CatNum,
           metrics::Scenario::NumNum};
  }
  return out;
}

}  // namespace

Config parse_config(const json& j) {
  if (!j.is_object()) invalid("config must be a JSON object");
  Config c;
  for (const auto& [key, value] : j.items()) {
    if (looks_secret(key)) {
      invalid(fmt::format("config must not store credentials (\"{}\"); put the key in an environment variable "
                          "and name it in chat.api_key_env",
                          key));
    }
    if (key == "mode") {
      c.mode = parse_mode(text_field(j, "mode"));
    } else if (key == "out" || key == "thresholds" || key == "library") {
      const auto v = text_field(j, key.c_str());
      (key == "out" ? c.out : key == "thresholds" ? c.thresholds : c.library) = v;
    } else if (key == "chat") {
      if (!value.is_object()) invalid("config field \"chat\" must be an object");
      for (const auto& [ck, cv] : value.items()) {
        if (looks_secret(ck)) {
          invalid(fmt::format("config must not store credentials (\"chat.{}\"); use chat.api_key_env", ck));
        }
        if (ck == "base_url") {
          c.chat.base_url = text_field(value, "base_url");
        } else if (ck == "model") {
          c.chat.model = text_field(value, "model");
        } else if (ck == "api_key_env") {
          c.chat.api_key_env = text_field(value, "api_key_env");
        } else if (ck == "timeout_s" || ck == "max_attempts") {
          if (!cv.is_number() || cv.get<double>() <= 0) invalid(fmt::format("config field \"chat.{}\" must be positive", ck));
          if (ck == "timeout_s") c.chat.timeout_s = cv.get<double>();
          else c.chat.max_attempts = cv.get<int>();
        } else {
          invalid(fmt::format("unknown config field \"chat.{}\"", ck));
        }
      }
    } else {
      invalid(fmt::format("unknown config field \"{}\"", key));
    }
  }
  return c;
}

Config load_config(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::FileNotFound, fmt::format("cannot open config '{}'", path.string()));
  try {
    return parse_config(json::parse(f));
  } catch (const json::exception& e) {
    invalid(fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bias audits for tabular data", "biasaudit"};
  app.require_subcommand(1);
  Flags f;

  SessionArgs detect_args;
  auto* detect = app.add_subcommand("detect", "Run one audit session and write the report");
  add_session_args(detect, detect_args);
  add_common(detect, f);
  add_session_flags(detect, f);

  SessionArgs repl_args;
  auto* repl = app.add_subcommand("repl", "Interactive audit: reports alternate with follow-up questions");
  add_session_args(repl, repl_args);
  add_common(repl, f);
  add_session_flags(repl, f);

  std::string taskset, judge = "heuristic";
  auto* bench = app.add_subcommand("bench", "Run a task set and score it against the oracle");
  bench->add_option("taskset", taskset, "JSON array of tasks")->required();
  bench->add_option("--jobs", f.jobs, "Tasks run concurrently")->check(CLI::PositiveNumber);
  bench->add_option("--judge", judge, "heuristic or chat")->check(CLI::IsMember({"heuristic", "chat"}));
  add_common(bench, f);
  add_session_flags(bench, f);

  std::vector<std::string> scenarios;
  std::vector<int> levels{1, 2, 3, 4, 5};
  auto* calibrate = app.add_subcommand("calibrate", "Fit threshold cut-points on a generated grading suite");
  calibrate->add_option("--scenario", scenarios, "Scenario tag (repeatable; default all five)")->delimiter(',');
  calibrate->add_option("--levels", levels, "Intended levels in the suite")->delimiter(',')->check(CLI::Range(1, 5));
  calibrate->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
  add_common(calibrate, f);

  auto* methods = app.add_subcommand("methods", "Browse or extend the method library");
  methods->require_subcommand(1);
  add_common(methods, f);
  auto* m_list = methods->add_subcommand("list", "Ids and intentions");
  std::string method_id;
  auto* m_show = methods->add_subcommand("show", "One entry as JSON");
  m_show->add_option("id", method_id)->required();
  std::string search_scenario, search_text;
  std::size_t top_k = 5;
  auto* m_search = methods->add_subcommand("search", "Entries for a scenario ranked against a query");
  m_search->add_option("--scenario", search_scenario, "Scenario tag")->required();
  m_search->add_option("--text", search_text, "Free-text query");
  m_search->add_option("--top-k", top_k)->check(CLI::PositiveNumber);
  std::string entry_file;
  auto* m_add = methods->add_subcommand("add", "Append an entry read from a JSON file");
  m_add->add_option("entry", entry_file, "JSON object with the entry")->required();
  // Lets --library and --out follow the action as well as precede it.
  for (auto* sub : {m_list, m_show, m_search, m_add}) sub->fallthrough();

  std::string synth_scenario;
  synthgen::SynthSpec spec;
  std::optional<int> synth_level;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic table with a chosen bias strength");
  synth->add_option("--scenario", synth_scenario, "Scenario tag")->required();
  synth->add_option("--n", spec.n, "Rows");
  synth->add_option("--k", spec.k, "Categories");
  auto* strength = synth->add_option("--strength", spec.strength, "Bias strength in [0, 1]");
  synth->add_option("--level", synth_level, "Use the strength calibrated for a level 1..5")->excludes(strength);
  add_common(synth, f);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kComplete : kError;
  }

  try {
    if (*detect) return session_command(detect_args, f, orchestrator::Mode::Batch, in, out, err);
    if (*repl) return session_command(repl_args, f, orchestrator::Mode::Interactive, in, out, err);

    if (*bench) {
      const auto r = resolve(f, "biasaudit-bench", true);
      const auto tasks = bench::load_taskset(taskset);
      const auto registry = orchestrator::builtin_registry();
      bench::BenchmarkOptions bo;
      bo.thresholds = r.thresholds;
      bo.library = r.library;
      bo.budget = f.budget;
      bo.jobs = f.jobs;
      if (r.mode == RunMode::Chat) {
        bo.planner = [&] { return std::make_unique<orchestrator::ChatPlanner>(r.chat, registry); };
        bo.advisor = [&] { return std::make_unique<orchestrator::ChatAdvisor>(r.chat); };
      }
      std::unique_ptr<bench::Judge> chat_judge;
      if (judge == "chat") {
        chat_judge = std::make_unique<bench::ChatJudge>(r.chat);
        bo.judge = chat_judge.get();
      }
      if (f.wall_clock) bo.clock = [] { return orchestrator::steady_clock_ms(); };
      const auto report = bench::run_benchmark(tasks, registry, bo);
      bench::write_benchmark(report, r.out);
      out << bench::render_benchmark_markdown(report);
      fmt::print(out, "\nresults: {}\n", r.out.generic_string());
      if (report.failed() > 0) {
        fmt::print(err, "biasaudit: {} of {} task(s) could not be scored\n", report.failed(), report.outcomes.size());
        return kIncomplete;
      }
      return kComplete;
    }

    if (*calibrate) {
      const auto r = resolve(f, "biasaudit-calibration", false);
      std::vector<synthgen::SuiteCase> suite;
      for (auto s : parse_scenarios(scenarios)) {
        const auto cases = synthgen::grade_suite(s, levels, f.seed == 0 ? 1 : f.seed);
        suite.insert(suite.end(), cases.begin(), cases.end());
      }
      const auto report = severity::calibrate(suite, *r.thresholds, f.jobs);
      fs::create_directories(r.out);
      severity::save_table(report.table, r.out / "thresholds.json");
      json rj = report;
      rj.erase("seconds");  // keeps the output tree reproducible
      std::ofstream(r.out / "calibration.json", std::ios::binary | std::ios::trunc) << rj.dump(2) << "\n";
      fmt::print(out, "{:<28} {:>8} {:>8}  {}\n", "metric", "before", "after", "separable");
      for (const auto& m : report.metrics) {
        fmt::print(out, "{:<28} {:>8.3f} {:>8.3f}  {}\n", m.metric_id, m.accuracy_before, m.accuracy_after,
                   m.separable ? "yes" : "no");
      }
      fmt::print(out, "pair accuracy {:.3f} -> {:.3f}; headline accuracy {:.3f} -> {:.3f}\n", report.accuracy_before,
                 report.accuracy_after, report.headline_accuracy_before, report.headline_accuracy_after);
      fmt::print(out, "table: {} ({})\n", (r.out / "thresholds.json").generic_string(), report.table.version());
      return kComplete;
    }

    if (*methods) {
      const bool to_file = !f.out.empty();
      const auto r = resolve(f, "biasaudit-methods", true);
      if (!r.library) throw Error(Errc::FileNotFound, "no method library found; pass --library");
      const auto& lib = *r.library;
      if (*m_list) {
        std::string text;
        for (const auto& [id, intention] : methodlib::list_intentions(lib)) text += fmt::format("{:<8} {}\n", id, intention);
        emit(out, r.out, "methods.txt", text, to_file);
      } else if (*m_show) {
        emit(out, r.out, "method.json", methodlib::entry_to_json(methodlib::get_method_by_id(lib, method_id)).dump(2) + "\n",
             to_file);
      } else if (*m_search) {
        const auto sc = parse_scenarios({search_scenario}).front();
        std::string text;
        for (const auto& e : methodlib::retrieve(lib, {sc, search_text, top_k})) {
          text += fmt::format("{:<8} {}\n", e.id, e.intention);
        }
        emit(out, r.out, "search.txt", text, to_file);
      } else if (*m_add) {
        std::ifstream ef(entry_file, std::ios::binary);
        if (!ef) throw Error(Errc::FileNotFound, fmt::format("cannot open '{}'", entry_file));
        nlohmann::ordered_json ej;
        try {
          ej = nlohmann::ordered_json::parse(ef);
        } catch (const json::exception& e) {
          throw Error(Errc::SchemaError, fmt::format("'{}' is not valid JSON: {}", entry_file, e.what()));
        }
        auto entry = methodlib::entry_from_json(ej);
        const auto id = entry.id;
        if (to_file) {
          // Leave the source library untouched; write the extended copy.
          methodlib::Library detached(lib.entries());
          const auto updated = methodlib::add_entry(detached, std::move(entry));
          fs::create_directories(r.out);
          methodlib::save_library(updated, r.out / "method_library.json");
          fmt::print(out, "added {} to {}\n", id, (r.out / "method_library.json").generic_string());
        } else {
          methodlib::add_entry(lib, std::move(entry));
          fmt::print(out, "added {} to {}\n", id, r.library_path.generic_string());
        }
      }
      return kComplete;
    }

    if (*synth) {
      const auto r = resolve(f, "biasaudit-synth", false);
      const auto sc = parse_scenarios({synth_scenario}).front();
      spec.scenario = sc;
      spec.seed = f.seed;
      if (synth_level) spec.strength = synthgen::strength_for_level(*synth_level);
      spec.validate();
      const auto table = synthgen::generate(spec);
      fs::create_directories(r.out);
      const auto file = r.out / fmt::format("synth_{}.csv", metrics::to_string(sc));
      tabular::write_table(table, file, r.csv.delimiter);
      std::ofstream(r.out / fmt::format("synth_{}.json", metrics::to_string(sc)), std::ios::binary | std::ios::trunc)
          << json(spec).dump(2) << "\n";
      fmt::print(out, "wrote {} ({} rows; features: {})\n", file.generic_string(), table.row_count(),
                 fmt::join(synthgen::feature_columns(sc), ", "));
      return kComplete;
    }
  } catch (const Error& e) {
    fmt::print(err, "biasaudit: error: {}\n", e.what());
    if (e.code() == Errc::InvalidSpec || e.code() == Errc::InvalidArgument) {
      for (auto* sc : app.get_subcommands()) err << sc->help();
    }
    return kError;
  } catch (const std::exception& e) {
    fmt::print(err, "biasaudit: error: {}\n", e.what());
    return kError;
  }
  return kError;
}

}  // namespace biasaudit::cli
