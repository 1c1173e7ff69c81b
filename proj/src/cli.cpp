#include "corpuslens/cli.hpp"

#include <iostream>

#include "CLI11.hpp"
#include "corpuslens/error.hpp"
#include "corpuslens/project.hpp"
#include "corpuslens/server.hpp"
#include "corpuslens/text.hpp"

namespace corpuslens::cli {

namespace {

struct Options {
  std::string config = "corpuslens.json";
  std::string lang;
  bool as_json = false;

  bool llm_clean = false;
  std::optional<std::size_t> min_count;
  std::vector<std::string> keywords;
  std::optional<std::size_t> k, iterations, kmin, kmax, top_n, limit, topic;
  std::optional<std::uint64_t> seed;
  std::string metric;
  std::size_t threads = 0;
  bool raw = false;
  std::string mapping;
  std::size_t top_k = 10;
  std::string text;
  bool skip = false;
  std::string descriptions;
  bool per_keyword = false;
  std::string node;
  std::size_t window = phrase::kDefaultWindow;
  std::size_t min_freq = 1;
  std::string measure = "raw";
  std::string pattern_name, scheme, slot;
  std::string match_id, label, annotator, note;
  std::string format = "md";
  std::vector<std::string> sections;
  std::string out_path;
  std::string host;
  std::optional<int> port;
};

std::string command_line(int argc, const char* const* argv) {
  std::string s;
  for (int i = 1; i < argc; ++i) {
    if (i > 1) s += ' ';
    s += argv[i];
  }
  return s;
}

void print_cards(std::ostream& out, const json& cards) {
  for (const auto& c : cards) {
    out << "Topic " << c.at("topic_id").get<std::size_t>();
    if (c.contains("raw_topics") && c.at("raw_topics").size() > 1) out << " (raw " << c.at("raw_topics").dump() << ")";
    out << "\n";
    const auto& kws = c.at("keywords");
    const auto& senses = c.at("senses");
    for (std::size_t i = 0; i < kws.size(); ++i) {
      out << "  " << i + 1 << ". " << kws[i].at("word").get<std::string>() << "\t"
          << text::fixed(kws[i].at("weight").get<double>(), 4);
      if (i < senses.size()) out << "\t" << senses[i].get<std::string>();
      out << "\n";
    }
    const auto& d = c.at("description");
    out << "  description: " << d.at("state").get<std::string>();
    if (!d.at("text").get<std::string>().empty()) out << ": " << d.at("text").get<std::string>();
    out << "\n";
    if (!c.at("implication").get<std::string>().empty()) out << "  implication: " << c.at("implication").get<std::string>() << "\n";
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"corpuslens: topic modelling, LLM-assisted topic labelling and corpus phraseology"};
  app.name("corpuslens");
  Options o;
  app.add_option("-c,--config", o.config, "Project config file")->capture_default_str();
  app.add_option("--lang", o.lang, "Corpus language (en or zh); optional when one is configured");
  app.add_flag("--json", o.as_json, "Print results as JSON");
  app.require_subcommand(1, 1);

  auto* ingest = app.add_subcommand("ingest", "Load, clean, tokenize, filter stopwords, lemmatize and tag the corpus");
  ingest->add_flag("--llm-clean", o.llm_clean, "Run the LLM cleaning pre-pass");

  auto* filter = app.add_subcommand("filter", "Keep documents with enough keyword hits");
  filter->add_option("--min-count", o.min_count, "Minimum keyword hits");
  filter->add_option("--keywords", o.keywords, "Query keywords (overrides the config)")->delimiter(',');

  auto* train = app.add_subcommand("train", "Train an LDA model");
  train->add_option("-k,--k", o.k, "Number of topics");
  train->add_option("--iterations", o.iterations, "Gibbs sweeps");
  train->add_option("--seed", o.seed, "Random seed");

  auto* sweep = app.add_subcommand("sweep", "Coherence over a range of topic counts");
  sweep->add_option("--kmin", o.kmin, "Smallest K");
  sweep->add_option("--kmax", o.kmax, "Largest K");
  sweep->add_option("--metric", o.metric, "umass or npmi");
  sweep->add_option("--top-n", o.top_n, "Words per topic scored");
  sweep->add_option("--iterations", o.iterations, "Gibbs sweeps per model");
  sweep->add_option("--seed", o.seed, "Base seed");
  sweep->add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* topics = app.add_subcommand("topics", "Show topic cards");
  topics->add_flag("--raw", o.raw, "Raw model topics instead of the cards");
  topics->add_option("-k,--k", o.k, "Keywords per raw topic");

  auto* merge = app.add_subcommand("merge", "Merge, keep or drop raw topics");
  merge->add_option("--mapping", o.mapping, "Mapping file (`3 keep`, `4 merge 2`, `8 drop`)")->required();
  merge->add_option("--top-k", o.top_k, "Keywords kept per merged topic")->capture_default_str();

  auto* describe = app.add_subcommand("describe", "Record the analyst description of a topic");
  describe->add_option("--topic", o.topic, "Topic id");
  describe->add_option("--text", o.text, "Description");
  describe->add_flag("--skip", o.skip, "Mark the topic as too abstract to describe");
  describe->add_option("--from", o.descriptions, "File of `<topic><TAB><description>` lines");

  auto* senses = app.add_subcommand("senses", "Ask the LLM for keyword senses");
  senses->add_option("--topic", o.topic, "Only this topic");
  senses->add_flag("--per-keyword", o.per_keyword, "One request per keyword");

  auto* label = app.add_subcommand("label", "Generate topic implications with the LLM");
  label->add_option("--topic", o.topic, "Only this topic");
  label->add_flag("--per-keyword", o.per_keyword, "One sense request per keyword");
  label->add_option("--descriptions", o.descriptions, "Apply descriptions from this file first");

  auto* kwic = app.add_subcommand("kwic", "Concordance lines for a node word");
  kwic->add_option("--node", o.node, "Node word form")->required();
  kwic->add_option("--window", o.window, "Tokens each side")->capture_default_str();
  kwic->add_option("--limit", o.limit, "Maximum lines");

  auto* colloc = app.add_subcommand("colloc", "Collocates of a node word");
  colloc->add_option("--node", o.node, "Node word form")->required();
  colloc->add_option("--window", o.window, "Tokens each side")->capture_default_str();
  colloc->add_option("--min-freq", o.min_freq, "Minimum co-occurrences")->capture_default_str();
  colloc->add_option("--measure", o.measure, "raw, mi or log_likelihood")->capture_default_str();
  colloc->add_option("--limit", o.limit, "Maximum rows");

  auto* pattern = app.add_subcommand("pattern", "Match a slot pattern around a node word");
  pattern->add_option("--name", o.pattern_name, "Pattern name from the pattern file")->required();
  pattern->add_option("--node", o.node, "Node word form")->required();
  pattern->add_option("--scheme", o.scheme, "Semantic class scheme");
  pattern->add_option("--slot", o.slot, "Slot to classify (DSL label or position)");
  pattern->add_option("--limit", o.limit, "Maximum matches printed");

  auto* annotate = app.add_subcommand("annotate", "Label the semantic prosody of a match");
  annotate->add_option("--match", o.match_id, "Match id")->required();
  annotate->add_option("--label", o.label, "positive, neutral or negative")->required();
  annotate->add_option("--annotator", o.annotator, "Annotator name")->required();
  annotate->add_option("--note", o.note, "Free-text note");

  auto* report = app.add_subcommand("report", "Render the analysis report");
  report->add_option("--format", o.format, "md or csv")->capture_default_str();
  report->add_option("--sections", o.sections, "topics,patterns,prosody")->delimiter(',');
  report->add_option("--out", o.out_path, "Also write the report to this file");

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto extra = app.remaining();
    if (app.get_subcommands().empty() && !extra.empty()) {
      err << "error: UsageError: unknown subcommand '" << extra.front() << "'\n" << app.help();
      return 2;
    }
    err << "error: UsageError: " << e.what() << "\n" << app.help();
    return 2;
  }

  const auto cmd = command_line(argc, argv);
  try {
    auto config = load_config(o.config);
    Project project(std::move(config));
    std::optional<Lang> lang;
    if (!o.lang.empty()) lang = parse_lang(o.lang);
    auto* sub = app.get_subcommands().front();
    const auto name = sub->get_name();
    json result;

    if (name == "ingest") {
      result = project.ingest(lang, o.llm_clean, cmd);
      if (!o.as_json) {
        out << "ingested " << result["documents"] << " documents, " << result["tokens"] << " tokens ("
            << result["dropped_empty"] << " empty after cleaning) -> " << result["tokenized"].get<std::string>() << "\n";
      }
    } else if (name == "filter") {
      result = project.filter(lang, o.min_count, o.keywords.empty() ? std::nullopt : std::optional(o.keywords), cmd);
      if (!o.as_json) {
        out << "kept " << result["documents_kept"] << " of " << result["documents_in"] << " documents (min_count="
            << result["min_count"] << ")\n";
      }
    } else if (name == "train") {
      result = project.train(lang, {o.k, o.iterations, o.seed}, cmd);
      if (!o.as_json) {
        out << "trained " << result["num_topics"] << " topics on " << result["documents"] << " documents ("
            << result["tokens"] << " tokens, vocabulary " << result["vocabulary"] << ") -> "
            << result["model"].get<std::string>() << "\n";
      }
    } else if (name == "sweep") {
      SweepOptions so{o.kmin, o.kmax, std::nullopt, o.top_n, o.iterations, o.seed, o.threads};
      if (!o.metric.empty()) so.metric = lda::parse_metric(o.metric);
      result = project.sweep(lang, so, cmd);
      if (!o.as_json) {
        for (const auto& pt : result["points"]) out << pt["k"] << "\t" << text::fixed(pt["score"].get<double>(), 6) << "\n";
        out << "best K = " << result["best_k"] << " (" << result["metric"].get<std::string>() << ") -> "
            << result["csv"].get<std::string>() << "\n";
      }
    } else if (name == "topics") {
      if (o.raw) {
        result = project.raw_topics(lang, o.k.value_or(project.config().top_keywords));
        if (!o.as_json) {
          for (const auto& t : result) {
            out << "Topic " << t["topic_id"] << ":";
            for (const auto& kw : t["keywords"]) {
              out << " " << kw["word"].get<std::string>() << " (" << text::fixed(kw["weight"].get<double>(), 4) << ")";
            }
            out << "\n";
          }
        }
      } else {
        result = project.topics(lang);
        if (!o.as_json) print_cards(out, result);
      }
    } else if (name == "merge") {
      result = project.merge(lang, text::read_file(o.mapping), o.top_k, cmd);
      if (!o.as_json) {
        out << "merged " << result["raw_topics"] << " raw topics into " << result["analysis_topics"]
            << " analysis topics -> " << result["analysis"].get<std::string>() << "\n";
        for (const auto& [raw, to] : result["merge_log"].items()) out << "  " << raw << " -> " << to.dump() << "\n";
      }
    } else if (name == "describe") {
      if (!o.descriptions.empty()) {
        result = project.describe_from_file(lang, o.descriptions);
      } else {
        if (!o.topic) throw Error(ErrorCode::UsageError, "describe needs --topic or --from");
        if (o.skip == !o.text.empty()) throw Error(ErrorCode::UsageError, "describe needs exactly one of --text or --skip");
        result = json::array({project.describe(lang, *o.topic, o.skip ? std::nullopt : std::optional(o.text))});
      }
      if (!o.as_json) {
        for (const auto& c : result) {
          out << "topic " << c["topic_id"] << ": description " << c["description"]["state"].get<std::string>()
              << " (revision " << c["revision"] << ")\n";
        }
      }
    } else if (name == "senses") {
      result = project.senses(lang, o.topic, o.per_keyword);
      if (!o.as_json) print_cards(out, result);
    } else if (name == "label") {
      if (!o.descriptions.empty()) project.describe_from_file(lang, o.descriptions);
      result = project.label(lang, o.topic, o.per_keyword);
      if (!o.as_json) print_cards(out, result);
    } else if (name == "kwic") {
      result = project.kwic(lang, o.node, o.window, o.limit);
      if (!o.as_json) {
        for (const auto& l : result["lines"]) {
          out << l["doc_id"].get<std::string>() << "\t" << l["left"].get<std::string>() << "\t"
              << l["node"].get<std::string>() << "\t" << l["right"].get<std::string>() << "\n";
        }
      }
    } else if (name == "colloc") {
      result = project.collocates(lang, o.node, o.window, o.min_freq, phrase::parse_measure(o.measure), 0, o.limit);
      if (!o.as_json) {
        for (const auto& c : result["collocates"]) {
          out << c["form"].get<std::string>() << "\t" << text::fixed(c["stat"].get<double>(), 4) << "\t" << c["freq"]
              << "\n";
        }
      }
    } else if (name == "pattern") {
      PatternQuery q{o.pattern_name, o.node, std::nullopt, std::nullopt};
      if (!o.scheme.empty()) q.scheme = o.scheme;
      if (!o.slot.empty()) q.slot = o.slot;
      result = project.pattern_matches(lang, q, true, 0, o.limit);
      if (!o.as_json) {
        out << result["total"] << " matches of " << result["pattern"].get<std::string>() << " ("
            << result["source"].get<std::string>() << ") for " << o.node << "\n";
        for (const auto& m : result["matches"]) {
          out << m["id"].get<std::string>() << "\t" << m["context"].get<std::string>() << "\n";
        }
        if (result.contains("classification")) {
          const auto& c = result["classification"];
          out << "classification of " << c["slot_label"].get<std::string>() << " by " << c["scheme"].get<std::string>()
              << ":\n";
          for (const auto& g : c["groups"]) {
            out << "  " << g["label"].get<std::string>() << "\t" << g["count"];
            for (const auto& [form, n] : g["fillers"].items()) out << "\t" << form << "×" << n;
            out << "\n";
          }
        }
      }
    } else if (name == "annotate") {
      result = project.annotate(lang, o.match_id, phrase::parse_prosody(o.label), o.annotator, o.note);
      if (!o.as_json) {
        out << result["match_id"].get<std::string>() << ": " << result["label"].get<std::string>() << " by "
            << result["annotator"].get<std::string>() << " (revision " << result["revision"] << ")\n";
      }
    } else if (name == "report") {
      std::set<phrase::ReportSection> sections;
      for (const auto& s : o.sections) sections.insert(phrase::parse_report_section(s));
      const auto doc = project.report(lang, phrase::parse_report_format(o.format), sections, cmd);
      if (!o.out_path.empty()) text::write_file(o.out_path, doc);
      if (o.as_json) result = {{"report", doc}};
      else out << doc;
    } else if (name == "serve") {
      serve_api(project, o.host.empty() ? project.config().server.host : o.host,
                o.port.value_or(project.config().server.port), out);
      return 0;
    }
    if (o.as_json) out << result.dump(2, ' ', false, json::error_handler_t::replace) << "\n";
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.code_name() << ": " << e.detail() << "\n";
    return e.code() == ErrorCode::UsageError ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: InternalError: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace corpuslens::cli
