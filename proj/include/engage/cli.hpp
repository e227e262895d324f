#pragma once

// The `engage` command line. `run` takes the arguments without the program
// name and writes to the given streams, so tests can drive it in-process.
//
// Exit status: 0 success, 1 operational error, 2 usage error. Errors are
// reported on stderr as {"error": {code, message, details}}.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "engage/analytics.hpp"
#include "engage/codebook.hpp"
#include "engage/corpus.hpp"
#include "engage/error.hpp"
#include "engage/filtering.hpp"
#include "engage/keyness.hpp"
#include "engage/pipeline_config.hpp"
#include "engage/reliability.hpp"
#include "engage/selection.hpp"
#include "engage/synthetic.hpp"

namespace engage::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// Set by the serve subcommand; implemented in tools/ so the library does not
// pull in the HTTP server unless asked to.
using ServeFn = int (*)(const json& options, std::ostream& out);
inline ServeFn& serve_hook() {
  static ServeFn fn = nullptr;
  return fn;
}

namespace detail {

struct Context {
  std::string config_path;
  std::string output = "text";
  std::string data_dir;
  PipelineConfig config;

  fs::path resolve(const std::string& p) const {
    fs::path path(p);
    if (!data_dir.empty() && path.is_relative()) return fs::path(data_dir) / path;
    return path;
  }
};

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + p.string(), {{"path", p.string()}});
  return in;
}

inline void write_file(const fs::path& p, const std::string& bytes) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + p.string(), {{"path", p.string()}});
  out << bytes;
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + p.string(), {{"path", p.string()}});
}

inline std::vector<MessageAnnotation> read_annotations(const fs::path& p) {
  auto in = open_in(p);
  return read_annotations_tsv(in);
}

inline void emit(const Context& ctx, const json& doc, std::ostream& out) {
  if (ctx.output == "json") {
    out << doc.dump(2) << '\n';
    return;
  }
  for (const auto& [k, v] : doc.items()) out << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
}

inline json stamped(const Context& ctx, const std::string& command) {
  return {{"command", command}, {"config_hash", ctx.config.hash()}};
}

inline std::string path_str(const fs::path& p) { return p.generic_string(); }

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using detail::Context;
  Context ctx;

  CLI::App app{"engage: keyword filtering, coding and analytics for lesson transcripts", "engage"};
  app.require_subcommand(1);
  app.add_option("--config", ctx.config_path, "pipeline config JSON; flags override it");
  app.add_option("--output", ctx.output, "text or json")->check(CLI::IsMember({"text", "json"}));
  app.add_option("--data-dir", ctx.data_dir, "base directory for relative paths")->envname("ENGAGE_DATA_DIR");

  // Overrides shared by several subcommands; applied after the config file.
  std::optional<double> alpha, recall_threshold, overlap;
  std::optional<std::size_t> window;
  std::optional<int> words_per_page, min_token_length;
  std::vector<int> sizes;
  std::optional<std::uint64_t> seed;
  const auto add_norm = [&](CLI::App* sc) {
    sc->add_option("--min-token-length", min_token_length, "shortest token kept, in code points");
  };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a corpus and write it in canonical form");
  std::string ingest_in, ingest_out;
  ingest->add_option("corpus", ingest_in, "manifest or corpus bundle")->required();
  ingest->add_option("--out", ingest_out, "output directory")->required();
  add_norm(ingest);

  // stats
  auto* stats = app.add_subcommand("stats", "corpus size in segments, tokens and page equivalents");
  std::string stats_in;
  stats->add_option("corpus", stats_in)->required();
  stats->add_option("--words-per-page", words_per_page);
  add_norm(stats);

  // keywords
  auto* keywords = app.add_subcommand("keywords", "rank contrastive keywords and cut candidate lists");
  std::string kw_in, kw_gold, kw_out;
  keywords->add_option("corpus", kw_in)->required();
  keywords->add_option("--gold", kw_gold, "gold annotations TSV")->required();
  keywords->add_option("--out-dir", kw_out)->required();
  keywords->add_option("--alpha", alpha);
  keywords->add_option("--sizes", sizes, "candidate list sizes");
  add_norm(keywords);

  // filter
  auto* filter = app.add_subcommand("filter", "keep segments that contain a keyword");
  std::string f_in, f_list, f_out, f_gold;
  filter->add_option("corpus", f_in)->required();
  filter->add_option("--keywords", f_list, "keyword list file")->required();
  filter->add_option("--out", f_out, "filtered output (JSONL)")->required();
  filter->add_option("--gold", f_gold, "gold annotations TSV for a recall report");
  filter->add_option("--window", window);
  filter->add_option("--words-per-page", words_per_page);
  add_norm(filter);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score candidate lists on recall and retained fraction");
  std::string e_in, e_gold, e_dir, e_out;
  std::vector<std::string> e_lists;
  evaluate->add_option("corpus", e_in)->required();
  evaluate->add_option("--gold", e_gold)->required();
  evaluate->add_option("--lists", e_lists, "keyword list files");
  evaluate->add_option("--lists-dir", e_dir, "directory of *.txt keyword lists");
  evaluate->add_option("--out", e_out, "evaluation table (TSV)")->required();
  evaluate->add_option("--window", window);
  evaluate->add_option("--words-per-page", words_per_page);
  add_norm(evaluate);

  // select
  auto* select = app.add_subcommand("select", "pick the smallest-retention list meeting the recall threshold");
  std::string s_in, s_out;
  select->add_option("evaluation", s_in, "evaluation table (TSV)")->required();
  select->add_option("--out", s_out, "selection record (JSON)");
  select->add_option("--recall-threshold", recall_threshold);

  // agreement
  auto* agreement = app.add_subcommand("agreement", "percent agreement between two coders");
  std::string a_a, a_b, a_corpus, a_out;
  agreement->add_option("--a", a_a, "first coder's annotations TSV")->required();
  agreement->add_option("--b", a_b, "second coder's annotations TSV")->required();
  agreement->add_option("--corpus", a_corpus, "check that every transcript exists");
  agreement->add_option("--threshold", overlap, "span overlap threshold");
  agreement->add_option("--out", a_out, "report (JSON)");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "category counts, ratios and percentages");
  std::string an_in, an_ann, an_out, an_format = "csv";
  bool an_figure = false;
  analyze->add_option("corpus", an_in)->required();
  analyze->add_option("--annotations", an_ann, "adjudicated annotations TSV")->required();
  analyze->add_option("--out-dir", an_out)->required();
  analyze->add_option("--format", an_format)->check(CLI::IsMember({"csv", "tsv", "json"}));
  analyze->add_flag("--figure-data", an_figure, "also write figure_data.json");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted messages");
  std::string sy_out;
  std::optional<std::size_t> sy_transcripts, sy_segments;
  std::optional<double> sy_rate, sy_injection, sy_leak;
  synth->add_option("--out", sy_out, "output directory")->required();
  synth->add_option("--seed", seed);
  synth->add_option("--transcripts", sy_transcripts);
  synth->add_option("--segments", sy_segments, "segments per transcript");
  synth->add_option("--message-rate", sy_rate);
  synth->add_option("--injection", sy_injection, "keyword injection rate in messages");
  synth->add_option("--leak", sy_leak, "message-word leak rate in background");

  // serve
  auto* serve = app.add_subcommand("serve", "run the coding service");
  std::string sv_store = "service-data", sv_host = "127.0.0.1", sv_token, sv_static;
  int sv_port = 8080;
  double sv_lease_minutes = 15.0;
  std::size_t sv_snapshot = 256;
  serve->add_option("--store", sv_store, "service data directory");
  serve->add_option("--host", sv_host);
  serve->add_option("--port", sv_port, "0 picks a free port");
  serve->add_option("--token", sv_token, "required X-Auth-Token value")->envname("ENGAGE_TOKEN");
  serve->add_option("--static-dir", sv_static, "coder UI bundle, served under /ui");
  serve->add_option("--lease-minutes", sv_lease_minutes);
  serve->add_option("--snapshot-every", sv_snapshot);

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", {{"code", "UsageError"}, {"message", e.what()}, {"details", json::object()}}}}.dump() << '\n';
    return 2;
  }

  try {
    if (!ctx.config_path.empty()) ctx.config = load_pipeline_config(ctx.resolve(ctx.config_path));
    auto& cfg = ctx.config;
    if (alpha) cfg.alpha = *alpha;
    if (recall_threshold) cfg.selection.recall_threshold = *recall_threshold;
    if (overlap) cfg.overlap_threshold = *overlap;
    if (window) cfg.window = *window;
    if (words_per_page) cfg.words_per_page = *words_per_page;
    if (min_token_length) cfg.normalization.min_token_length = *min_token_length;
    if (!sizes.empty()) cfg.sizes = std::set<int>(sizes.begin(), sizes.end());
    if (seed) cfg.synthesis.seed = *seed;
    if (sy_transcripts) cfg.synthesis.transcript_count = *sy_transcripts;
    if (sy_segments) cfg.synthesis.segments_per_transcript = *sy_segments;
    if (sy_rate) cfg.synthesis.message_rate = *sy_rate;
    if (sy_injection) cfg.synthesis.keyword_injection = *sy_injection;
    if (sy_leak) cfg.synthesis.background_leak = *sy_leak;
    try {
      cfg.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::UsageError, e.message(), e.details());
    }
    const std::string hash = cfg.hash();
    const auto load = [&](const std::string& p) { return read_corpus(ctx.resolve(p), cfg.normalization); };

    if (*ingest) {
      const Corpus corpus = load(ingest_in);
      const auto dir = ctx.resolve(ingest_out);
      save_corpus(corpus, dir);
      json doc = detail::stamped(ctx, "ingest");
      doc["manifest"] = detail::path_str(dir / "manifest.json");
      doc["stats"] = to_json(corpus_stats(corpus, cfg.words_per_page));
      detail::write_file(dir / "ingest.json", doc.dump(2) + "\n");
      detail::emit(ctx, doc, out);
    } else if (*stats) {
      json doc = detail::stamped(ctx, "stats");
      doc["stats"] = to_json(corpus_stats(load(stats_in), cfg.words_per_page));
      detail::emit(ctx, doc, out);
    } else if (*keywords) {
      const Corpus corpus = load(kw_in);
      const auto gold = detail::read_annotations(ctx.resolve(kw_gold));
      const auto table = build_contrast_table(corpus, gold, cfg.normalization);
      const auto ranked = score_keywords(table, cfg.alpha);
      const auto cands = candidate_lists(ranked, cfg.sizes);
      const auto dir = ctx.resolve(kw_out);
      std::ostringstream ranking;
      ranking << "# config: " << hash << '\n';
      write_ranking_tsv(ranked, ranking);
      detail::write_file(dir / "ranking.tsv", ranking.str());
      json lists = json::array();
      for (const auto& l : cands.lists) {
        std::ostringstream s;
        write_keyword_list(l, s, hash);
        const auto file = dir / "lists" / (l.name + ".txt");
        detail::write_file(file, s.str());
        lists.push_back({{"list", l.name}, {"size", l.size()}, {"path", detail::path_str(file)}});
      }
      json top = json::array();
      for (std::size_t i = 0; i < std::min<std::size_t>(10, ranked.size()); ++i) top.push_back(ranked[i].token);
      json doc = detail::stamped(ctx, "keywords");
      doc["vocabulary_size"] = table.vocabulary_size();
      doc["message_tokens"] = table.message_total;
      doc["background_tokens"] = table.background_total;
      doc["top"] = std::move(top);
      doc["lists"] = std::move(lists);
      doc["warnings"] = cands.warnings;
      detail::write_file(dir / "candidates.json", doc.dump(2) + "\n");
      detail::emit(ctx, doc, out);
    } else if (*filter) {
      const Corpus corpus = load(f_in);
      const auto list_path = ctx.resolve(f_list);
      auto lin = detail::open_in(list_path);
      const auto list = read_keyword_list(lin, list_path.stem().string(), cfg.normalization);
      const auto set = filter_corpus(corpus, list, cfg.window, cfg.normalization);
      std::ostringstream s;
      write_filtered_set(set, corpus, s);
      detail::write_file(ctx.resolve(f_out), s.str());
      json doc = detail::stamped(ctx, "filter");
      doc["list"] = set.list_name;
      doc["filter_hash"] = set.config_hash;
      doc["reduction"] = to_json(reduction_report(corpus, set.transcripts, cfg.words_per_page));
      if (!f_gold.empty())
        doc["recall"] = to_json(recall_report(corpus, set.transcripts, detail::read_annotations(ctx.resolve(f_gold))));
      detail::emit(ctx, doc, out);
    } else if (*evaluate) {
      const Corpus corpus = load(e_in);
      const auto gold = detail::read_annotations(ctx.resolve(e_gold));
      std::vector<fs::path> files;
      for (const auto& p : e_lists) files.push_back(ctx.resolve(p));
      if (!e_dir.empty()) {
        const auto dir = ctx.resolve(e_dir);
        if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFile, "no such directory " + dir.string());
        std::vector<fs::path> found;
        for (const auto& entry : fs::directory_iterator(dir))
          if (entry.is_regular_file() && entry.path().extension() == ".txt") found.push_back(entry.path());
        std::sort(found.begin(), found.end());
        files.insert(files.end(), found.begin(), found.end());
      }
      if (files.empty()) throw Error(ErrorCode::UsageError, "give --lists or --lists-dir");
      std::vector<KeywordList> lists;
      for (const auto& f : files) {
        auto in = detail::open_in(f);
        lists.push_back(read_keyword_list(in, f.stem().string(), cfg.normalization));
      }
      const auto table = evaluate_lists(corpus, gold, lists, cfg.window, cfg.normalization, cfg.words_per_page);
      std::ostringstream s;
      s << "# config: " << hash << '\n';
      write_evaluation_tsv(table, s);
      detail::write_file(ctx.resolve(e_out), s.str());
      json rows = json::array();
      for (const auto& r : table.rows)
        rows.push_back({{"list", r.list},
                        {"size", r.size},
                        {"recall", r.recall},
                        {"retained_fraction", r.retained_fraction},
                        {"failed", r.failed}});
      json doc = detail::stamped(ctx, "evaluate");
      doc["rows"] = std::move(rows);
      detail::emit(ctx, doc, out);
    } else if (*select) {
      auto in = detail::open_in(ctx.resolve(s_in));
      const auto sel = select_list(read_evaluation_tsv(in), cfg.selection);
      json doc = detail::stamped(ctx, "select");
      doc["selection"] = selection_to_json(sel);
      if (!s_out.empty()) detail::write_file(ctx.resolve(s_out), doc.dump(2) + "\n");
      detail::emit(ctx, doc, out);
    } else if (*agreement) {
      std::optional<Corpus> corpus;
      if (!a_corpus.empty()) corpus = load(a_corpus);
      const auto pairs = align_annotations(detail::read_annotations(ctx.resolve(a_a)),
                                           detail::read_annotations(ctx.resolve(a_b)), cfg.overlap_threshold,
                                           corpus ? &*corpus : nullptr);
      json doc = detail::stamped(ctx, "agreement");
      doc["overlap_threshold"] = cfg.overlap_threshold;
      doc["report"] = to_json(agreement_report(pairs));
      if (!a_out.empty()) detail::write_file(ctx.resolve(a_out), doc.dump(2) + "\n");
      detail::emit(ctx, doc, out);
    } else if (*analyze) {
      const Corpus corpus = load(an_in);
      const auto anns = detail::read_annotations(ctx.resolve(an_ann));
      const auto format = *parse_table_format(an_format);
      const auto dir = ctx.resolve(an_out);
      const auto overall = category_counts(anns, corpus, Grouping::Overall);
      const auto by_grade = category_counts(anns, corpus, Grouping::ByGrade);
      const auto by_trimester = category_counts(anns, corpus, Grouping::ByTrimester);
      const auto ratios = level_ratios(by_grade, corpus.group_registry);
      const std::string ext = "." + an_format;
      std::vector<std::pair<std::string, std::string>> files = {
          {"counts_overall", render_table(overall, format)},
          {"counts_by_grade", render_table(by_grade, format)},
          {"counts_by_trimester", render_table(by_trimester, format)},
          {"ratios_by_grade", render_table(ratios, format)}};
      if (overall.total > 0) {
        files.emplace_back("percent_overall", render_table(percentages(overall), format));
        files.emplace_back("percent_by_grade", render_table(percentages(ratios), format));
        files.emplace_back("percent_by_trimester", render_table(percentages(by_trimester), format));
      }
      json written = json::array();
      for (const auto& [name, bytes] : files) {
        detail::write_file(dir / (name + ext), bytes);
        written.push_back(detail::path_str(dir / (name + ext)));
      }
      json doc = detail::stamped(ctx, "analyze");
      doc["total"] = overall.total;
      json grade_totals = json::object();
      json grade_ratios = json::object();
      for (int g : group_keys(Grouping::ByGrade)) {
        grade_totals[std::to_string(g)] = by_grade.group_total(g);
        if (ratios.groups.count(g)) grade_ratios[std::to_string(g)] = ratios.grade_total(g);
      }
      json trimester_totals = json::object();
      for (int t : group_keys(Grouping::ByTrimester)) trimester_totals[std::to_string(t)] = by_trimester.group_total(t);
      doc["grade_totals"] = std::move(grade_totals);
      doc["grade_ratios"] = std::move(grade_ratios);
      doc["trimester_totals"] = std::move(trimester_totals);
      if (overall.total > 0) {
        json shares = json::object();
        for (const auto& [k, v] : group_shares(percentages(by_trimester))) shares[std::to_string(k)] = v;
        doc["trimester_shares"] = std::move(shares);
      }
      if (an_figure) {
        auto fig = figure_data(overall, by_grade, by_trimester, corpus.group_registry);
        fig["config_hash"] = hash;
        detail::write_file(dir / "figure_data.json", fig.dump(2) + "\n");
        written.push_back(detail::path_str(dir / "figure_data.json"));
      }
      doc["files"] = std::move(written);
      detail::emit(ctx, doc, out);
    } else if (*synth) {
      const auto syn = generate_synthetic_corpus(cfg.synthesis);
      const auto dir = ctx.resolve(sy_out);
      save_corpus(syn.corpus, dir);
      std::ostringstream gold;
      write_annotations_tsv(syn.gold, gold);
      detail::write_file(dir / "gold.tsv", gold.str());
      std::ostringstream truth;
      truth << "# list: truth\n# config: " << hash << '\n';
      for (const auto& t : syn.discriminative_tokens) truth << t << '\n';
      detail::write_file(dir / "truth.txt", truth.str());
      const auto st = corpus_stats(syn.corpus, cfg.words_per_page);
      json doc = detail::stamped(ctx, "synth");
      doc["params"] = to_json(cfg.synthesis);
      doc["stats"] = to_json(st);
      doc["planted_messages"] = syn.gold.size();
      detail::write_file(dir / "synth.json", doc.dump(2) + "\n");
      detail::emit(ctx, doc, out);
    } else if (*serve) {
      if (!serve_hook()) throw Error(ErrorCode::UsageError, "this build has no HTTP server");
      json opts = {{"store", detail::path_str(ctx.resolve(sv_store))},
                   {"host", sv_host},
                   {"port", sv_port},
                   {"token", sv_token},
                   {"static_dir", sv_static.empty() ? std::string() : detail::path_str(ctx.resolve(sv_static))},
                   {"lease_ms", static_cast<std::int64_t>(sv_lease_minutes * 60000.0)},
                   {"snapshot_every", sv_snapshot}};
      return serve_hook()(opts, out);
    }
    return 0;
  } catch (const Error& e) {
    err << json{{"error", e.to_json()}}.dump() << '\n';
    return e.code() == ErrorCode::UsageError ? 2 : 1;
  } catch (const std::exception& e) {
    err << json{{"error", {{"code", "IoFailure"}, {"message", e.what()}, {"details", json::object()}}}}.dump() << '\n';
    return 1;
  }
}

}  // namespace engage::cli
