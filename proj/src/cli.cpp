#include "evidistill/cli.hpp"

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "evidistill/labels.hpp"
#include "evidistill/plot.hpp"
#include "evidistill/serialization.hpp"
#include "evidistill/text.hpp"

namespace evidistill::cli {
namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingInput: return kExitMissingInput;
    case ErrorCode::ConfigInvalid: return kExitConfigInvalid;
    case ErrorCode::BudgetExhausted: return kExitBudgetExhausted;
    default: return kExitFailure;
  }
}

std::vector<std::size_t> parse_grid(const std::string& grid) {
  std::vector<std::size_t> out;
  auto bad = [&] { return Error(ErrorCode::ConfigInvalid, "invalid grid '" + grid + "'"); };
  auto to_num = [&](const std::string& s) {
    auto t = text::trim(s);
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) throw bad();
    return static_cast<std::size_t>(std::stoull(t));
  };
  if (auto dots = grid.find(".."); dots != std::string::npos) {
    auto lo = to_num(grid.substr(0, dots));
    auto hi = to_num(grid.substr(dots + 2));
    if (hi < lo) throw bad();
    for (auto v = lo; v <= hi; ++v) out.push_back(v);
  } else {
    for (const auto& part : text::split(grid, ',')) out.push_back(to_num(part));
  }
  if (out.empty()) throw bad();
  return out;
}

namespace {

// String-typed settings converted after parsing.
struct RawSettings {
  std::string workspace = ".";
  std::string ocr_backend = "mock", caption_backend = "mock";
  std::string reverse_fixture, search_fixture, ocr_fixture, caption_fixture;
  std::string cache_dir, split_file;
  std::string ablation = "full";
  std::string length_unit = "whitespace_tokens";
  std::string sweep_textual = "1..10", sweep_visual = "1..10";
  long long budget = -1;
  long long seed = 13;
};

struct State {
  RawSettings raw;
  ParsedCommand cmd;
};

void add_options(CLI::App& app, State& s) {
  auto& c = s.cmd.config;
  auto& r = s.raw;
  app.set_config("--config", "", "key = value file; flags on the command line take precedence");

  app.add_option("-w,--workspace", r.workspace, "workspace directory")->capture_default_str();
  app.add_option("--rate-limit", c.rate_limit, "external requests per second (0 = unlimited)")->capture_default_str();
  app.add_option("--rate-burst", c.rate_burst, "burst size of the request limiter")->capture_default_str();
  app.add_option("--parallelism", c.parallelism, "worker threads per stage")->capture_default_str();

  app.add_option("--ocr-backend", r.ocr_backend, "mock | command | http")->capture_default_str();
  app.add_option("--ocr-command", c.visual.ocr.command, "OCR shell command; image path passed as $1");
  app.add_option("--ocr-url", c.visual.ocr.url, "OCR service URL (POST image bytes)");
  app.add_option("--ocr-fixture", r.ocr_fixture, "mock OCR table (sha256 <TAB> text)");
  app.add_option("--caption-backend", r.caption_backend, "mock | command | http")->capture_default_str();
  app.add_option("--caption-command", c.visual.caption.command, "captioning shell command");
  app.add_option("--caption-url", c.visual.caption.url, "captioning service URL");
  app.add_option("--caption-fixture", r.caption_fixture, "mock caption table");
  app.add_option("--visual-timeout", c.visual.timeout_seconds, "seconds per OCR/caption call")->capture_default_str();

  app.add_option("--max-textual", c.retrieval.max_textual, "textual evidence items per instance")->capture_default_str();
  app.add_option("--max-visual", c.retrieval.max_visual, "visual evidence items per instance")->capture_default_str();
  app.add_option("--max-item-chars", c.retrieval.max_item_chars, "code points kept per evidence field")
      ->capture_default_str();
  app.add_option("--reverse-engine", c.retrieval.reverse_image.engine, "mock | json_http | google_vision")
      ->capture_default_str();
  app.add_option("--reverse-url", c.retrieval.reverse_image.url, "reverse image search endpoint");
  app.add_option("--reverse-key-env", c.retrieval.reverse_image.api_key_env, "env var holding its API key");
  app.add_option("--reverse-fixture", r.reverse_fixture, "mock reverse search responses (JSON)");
  app.add_option("--search-engine", c.retrieval.text_search.engine, "mock | json_http | google_cse")
      ->capture_default_str();
  app.add_option("--search-url", c.retrieval.text_search.url, "image search endpoint");
  app.add_option("--search-key-env", c.retrieval.text_search.api_key_env, "env var holding its API key");
  app.add_option("--search-cx", c.retrieval.text_search.cx, "programmable search engine id");
  app.add_option("--search-fixture", r.search_fixture, "mock image search responses (JSON)");
  app.add_option("--cache-dir", r.cache_dir, "response cache (default <workspace>/cache)");
  app.add_flag("--offline", c.retrieval.offline_mode, "serve searches from the cache only");
  app.add_option("--retry-attempts", c.retrieval.retry.max_attempts, "attempts per external call")
      ->capture_default_str();
  app.add_option("--retry-backoff", c.retrieval.retry.base_backoff_seconds, "base backoff seconds")
      ->capture_default_str();

  app.add_option("--teacher", c.teacher.endpoint.kind, "mock | chat_completion")->capture_default_str();
  app.add_option("--teacher-url", c.teacher.endpoint.url, "chat-completion endpoint")->capture_default_str();
  app.add_option("--teacher-key-env", c.teacher.endpoint.api_key_env, "env var holding the teacher key")
      ->capture_default_str();
  app.add_option("--teacher-model", c.teacher.model_id, "teacher model id")->capture_default_str();
  app.add_option("--temperature", c.teacher.temperature, "teacher sampling temperature")->capture_default_str();
  app.add_option("--max-output-tokens", c.teacher.max_output_tokens, "teacher completion cap")->capture_default_str();
  app.add_option("--budget", r.budget, "teacher request cap (-1 = none)")->capture_default_str();

  app.add_flag("--include-image", c.include_image, "attach image references to records");
  app.add_option("--ablation", r.ablation, "full | no_rationale | no_evidence_no_rationale")->capture_default_str();
  app.add_option("--test-fraction", c.test_fraction, "share of records in the test split")->capture_default_str();
  app.add_option("--seed", r.seed, "split seed")->capture_default_str();
  app.add_option("--split-file", r.split_file, "fixed assignment (post_id <TAB> train|test)");

  app.add_option("--model-client", c.model.kind, "echo | constant | chat_completion | student_http")
      ->capture_default_str();
  app.add_option("--model-url", c.model.url, "model endpoint");
  app.add_option("--model-id", c.model.model_id, "model id for chat endpoints");
  app.add_option("--model-key-env", c.model.api_key_env, "env var holding the model key")->capture_default_str();
  app.add_option("--model-text", c.model.constant_text, "reply of the constant client");
  app.add_option("--availability-probe", c.availability_probe, "abort when this many leading requests fail")
      ->capture_default_str();
  app.add_option("--sweep-textual", r.sweep_textual, "textual grid, e.g. 1..10 or 1,3,5")->capture_default_str();
  app.add_option("--sweep-visual", r.sweep_visual, "visual grid")->capture_default_str();

  app.add_option("--length-unit", r.length_unit, "chars | whitespace_tokens")->capture_default_str();
  app.add_option("--bucket-width", c.bucket_width, "histogram bucket width")->capture_default_str();
}

void add_subcommands(CLI::App& app, State& s) {
  auto& cmd = s.cmd;
  app.require_subcommand(1);
  app.add_subcommand("augment", "OCR and captions for every post");
  app.add_subcommand("retrieve", "reverse image and text search evidence");
  app.add_subcommand("elicit", "teacher rationales")
      ->add_flag("--fresh", cmd.fresh, "discard persisted rationales instead of resuming");
  app.add_subcommand("assemble", "instruction records for the configured ablation");
  app.add_subcommand("split", "train/test split");
  app.add_subcommand("stats", "class counts and length histogram")
      ->add_option("--from-counts", cmd.from_counts, "print the table for a counts file instead");
  app.add_subcommand("eval", "score a model client on the test split")
      ->add_flag("--resume", cmd.resume, "reuse entries already in the per-instance log");
  app.add_subcommand("sweep", "evaluate over the evidence-count grid");
  auto* compare = app.add_subcommand("compare", "compare metrics files or result tables");
  compare->add_option("inputs", cmd.inputs, "metrics.tsv files or name/accuracy/precision/recall/f1 tables")
      ->required();
  compare->add_option("-o,--output", cmd.output, "also write the flagged table here");
  compare->add_option("--scale", cmd.scale, "multiply values before printing (0 = auto)");
  auto* plot = app.add_subcommand("plot", "render a sweep or histogram table to SVG");
  plot->add_option("input", cmd.inputs, "table file")->required();
  plot->add_option("-o,--output", cmd.output, "SVG path (default: input with .svg)");
}

void finalize(State& s) {
  auto& c = s.cmd.config;
  auto& r = s.raw;
  c.workspace = r.workspace;
  auto backend = [](const std::string& v, const char* what) {
    auto kind = backend_kind_from_string(v);
    if (!kind) throw Error(ErrorCode::ConfigInvalid, std::string("unknown ") + what + " backend '" + v + "'");
    return *kind;
  };
  c.visual.ocr.kind = backend(r.ocr_backend, "ocr");
  c.visual.caption.kind = backend(r.caption_backend, "caption");
  c.visual.ocr.fixture = r.ocr_fixture;
  c.visual.caption.fixture = r.caption_fixture;
  c.retrieval.reverse_image.fixture = r.reverse_fixture;
  c.retrieval.text_search.fixture = r.search_fixture;
  c.retrieval.cache_dir = r.cache_dir;
  c.split_file = r.split_file;
  if (r.budget >= 0) c.teacher.cost_budget = static_cast<std::size_t>(r.budget);
  if (r.seed < 0) throw Error(ErrorCode::ConfigInvalid, "seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(r.seed);
  auto ablation = ablation_from_string(r.ablation);
  if (!ablation) throw Error(ErrorCode::ConfigInvalid, "unknown ablation '" + r.ablation + "'");
  c.ablation = *ablation;
  auto unit = length_unit_from_string(r.length_unit);
  if (!unit) throw Error(ErrorCode::ConfigInvalid, "unknown length unit '" + r.length_unit + "'");
  c.length_unit = *unit;
  c.sweep_textual = parse_grid(r.sweep_textual);
  c.sweep_visual = parse_grid(r.sweep_visual);
  c.teacher.parallelism = c.parallelism;
  c.teacher.retry = c.retrieval.retry;
}

void parse_into(CLI::App& app, State& s, const std::vector<std::string>& args) {
  app.fallthrough();
  add_options(app, s);
  add_subcommands(app, s);
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  app.parse(static_cast<int>(argv.size()), argv.data());
  s.cmd.subcommand = app.get_subcommands().front()->get_name();
}

void print_stage(std::ostream& out, const std::string& name, const StageReport& r, const Pipeline& p) {
  out << name << ": " << r.processed << " processed, " << r.failed << " failed, " << p.gate()->requests()
      << " external requests\n";
}

int execute(const ParsedCommand& cmd, std::ostream& out) {
  const auto& sub = cmd.subcommand;
  if (sub == "stats" && !cmd.from_counts.empty()) {
    out << render_stats_table(parse_stats_tsv(read_text_file(cmd.from_counts)));
    return kExitOk;
  }
  if (sub == "plot") {
    fs::path input = cmd.inputs.front();
    fs::path output = cmd.output.empty() ? fs::path(input).replace_extension(".svg") : fs::path(cmd.output);
    write_text_file(output, plot_table_svg(read_text_file(input)));
    out << "wrote " << output.string() << "\n";
    return kExitOk;
  }
  if (sub == "compare") {
    std::vector<ResultRow> rows;
    for (const auto& in : cmd.inputs) {
      const auto content = read_text_file(in);
      if (content.rfind("metric\tvalue", 0) == 0) {
        std::map<std::string, double> values;
        for (const auto& line : text::split(content, '\n')) {
          auto cells = text::split(line, '\t');
          if (cells.size() == 2 && cells[0] != "metric") values[cells[0]] = std::atof(cells[1].c_str());
        }
        auto name = fs::path(in).filename().string();
        if (auto dot = name.find(".metrics"); dot != std::string::npos) name = name.substr(0, dot);
        const auto parent = fs::path(in).parent_path().filename().string();
        if (!parent.empty()) name = parent + "/" + name;
        rows.push_back({name, {values["accuracy"], values["precision"], values["recall"], values["f1"]}});
      } else {
        for (auto& row : parse_result_rows(content)) rows.push_back(std::move(row));
      }
    }
    auto table = compare_ablations(std::move(rows));
    double scale = cmd.scale;
    if (scale == 0.0) {
      scale = 100.0;
      for (const auto& row : table.rows) {
        for (double v : row.values) {
          if (v > 1.0) scale = 1.0;
        }
      }
    }
    out << render_comparison(table, scale);
    if (!cmd.output.empty()) write_text_file(cmd.output, render_comparison_tsv(table));
    return kExitOk;
  }

  Pipeline p(cmd.config);
  if (sub == "augment") {
    print_stage(out, sub, p.augment(), p);
  } else if (sub == "retrieve") {
    print_stage(out, sub, p.retrieve(), p);
  } else if (sub == "elicit") {
    auto r = p.elicit(!cmd.fresh);
    out << "elicit: " << r.succeeded << " succeeded, " << r.failed << " failed, " << r.quarantined
        << " quarantined, " << r.skipped << " already done, " << r.requests_spent << " teacher requests\n";
    if (r.budget_exhausted) {
      out << "elicit: teacher budget exhausted; rerun to resume\n";
      return kExitBudgetExhausted;
    }
  } else if (sub == "assemble") {
    print_stage(out, sub, p.assemble(), p);
  } else if (sub == "split") {
    auto r = p.split();
    out << "split: " << r.train << " train, " << r.test << " test\n";
  } else if (sub == "stats") {
    out << render_stats_table(p.stats());
    if (fs::exists(p.workspace().instances_file())) {
      p.length_histogram();
      out << "wrote " << (p.workspace().results_dir() / "length_histogram.tsv").string() << "\n";
    }
  } else if (sub == "eval") {
    auto r = p.eval(cmd.resume);
    out << render_metrics_text(r.result.metrics);
    out << "log: " << r.log_file.string() << "\nmetrics: " << r.metrics_file.string() << "\n";
  } else if (sub == "sweep") {
    auto points = p.sweep();
    out << render_sweep_tsv(points);
  }
  return kExitOk;
}

}  // namespace

ParsedCommand parse_command_line(const std::vector<std::string>& args) {
  CLI::App app{"evidistill"};
  State s;
  try {
    parse_into(app, s, args);
  } catch (const CLI::ParseError& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  finalize(s);
  return s.cmd;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal misinformation instruction data and evaluation pipeline", "evidistill"};
  State s;
  try {
    parse_into(app, s, args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::FileError& e) {
    err << "evidistill: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const CLI::ParseError& e) {
    err << "evidistill: " << e.what() << "\n";
    return kExitConfigInvalid;
  }
  try {
    finalize(s);
    return execute(s.cmd, out);
  } catch (const Error& e) {
    err << "evidistill: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "evidistill: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace evidistill::cli
