#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "corpuslens/cli.hpp"
#include "corpuslens/corpus.hpp"
#include "corpuslens/error.hpp"
#include "corpuslens/phraseology.hpp"
#include "corpuslens/topic_model.hpp"

namespace py = pybind11;
using namespace corpuslens;

namespace {

using TaggedDoc = std::vector<std::pair<std::string, std::string>>;

std::vector<TokenizedDocument> tagged_documents(const std::vector<TaggedDoc>& docs, Lang lang,
                                                const std::optional<std::vector<std::string>>& ids) {
  if (ids && ids->size() != docs.size()) throw Error(ErrorCode::InvalidConfig, "ids and documents differ in length");
  std::vector<TokenizedDocument> out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    TokenizedDocument td;
    td.doc_id = ids ? (*ids)[d] : "d" + std::to_string(d);
    td.lang = lang;
    for (const auto& [surface, tag] : docs[d]) {
      const auto pos = parse_pos(tag);
      if (!pos) throw Error(ErrorCode::ParseError, "unknown tag '" + tag + "'");
      td.tokens.push_back({surface, surface, *pos, 0});
    }
    td.stopword_mask.assign(td.tokens.size(), false);
    out.push_back(std::move(td));
  }
  return out;
}

class Concordancer {
 public:
  Concordancer(const std::vector<TaggedDoc>& docs, const std::string& lang,
               const std::optional<std::vector<std::string>>& ids)
      : lang_(parse_lang(lang)), index_(phrase::build_index(tagged_documents(docs, lang_, ids))) {}

  std::size_t frequency(const std::string& form) const { return phrase::frequency(index_, form); }

  py::list kwic(const std::string& node, std::size_t window, std::optional<std::size_t> limit) const {
    py::list out;
    for (const auto& line : phrase::kwic(index_, node, window, limit)) {
      py::dict row;
      row["doc_id"] = line.doc_id;
      row["left"] = phrase::join_tokens(line.left, lang_);
      row["node"] = line.node_surface;
      row["right"] = phrase::join_tokens(line.right, lang_);
      out.append(row);
    }
    return out;
  }

  std::vector<std::tuple<std::string, double, std::size_t>> collocates(const std::string& node, std::size_t window,
                                                                       std::size_t min_freq,
                                                                       const std::string& measure) const {
    std::vector<std::tuple<std::string, double, std::size_t>> out;
    for (const auto& c : phrase::collocates(index_, node, window, min_freq, phrase::parse_measure(measure))) {
      out.emplace_back(c.form, c.stat, c.freq);
    }
    return out;
  }

  py::list match(const std::string& pattern, const std::string& node, const std::string& name) const {
    const auto compiled = phrase::compile_pattern(pattern, name);
    py::list out;
    for (const auto& m : phrase::match_pattern(index_, compiled, node)) {
      py::dict fillers;
      for (const auto& [slot, span] : m.fillers) {
        fillers[py::int_(slot)] = phrase::filler_text(m, slot, index_);
      }
      py::dict row;
      row["id"] = m.id();
      row["doc_id"] = m.doc_id;
      row["span"] = py::make_tuple(m.span.begin, m.span.end);
      row["fillers"] = fillers;
      row["context"] = phrase::render_match_context(index_, m);
      out.append(row);
    }
    return out;
  }

 private:
  Lang lang_;
  phrase::PositionIndex index_;
};

struct Documents {
  std::shared_ptr<const Vocabulary> vocab;
  BagOfWords bow;
};

Documents bag_of_words(const std::vector<std::vector<std::string>>& docs) {
  std::vector<TokenizedDocument> tdocs;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    TokenizedDocument td;
    td.doc_id = "d" + std::to_string(d);
    for (const auto& w : docs[d]) td.tokens.push_back({w, w, Pos::OTHER, 0});
    td.stopword_mask.assign(td.tokens.size(), false);
    tdocs.push_back(std::move(td));
  }
  auto vocab = std::make_shared<const Vocabulary>(build_vocabulary(tdocs, 1));
  auto bow = to_bag_of_words(tdocs, *vocab);
  return {vocab, std::move(bow)};
}

lda::LdaConfig lda_config(std::size_t k, std::size_t iterations, std::size_t burn_in, std::uint64_t seed,
                          std::optional<double> alpha, double beta) {
  lda::LdaConfig cfg;
  cfg.num_topics = k;
  cfg.iterations = iterations;
  cfg.burn_in = burn_in;
  cfg.seed = seed;
  cfg.alpha = alpha;
  cfg.beta = beta;
  return cfg;
}

class Model {
 public:
  Model(Documents docs, lda::TopicModel model) : docs_(std::move(docs)), model_(std::move(model)) {}

  std::size_t num_topics() const { return model_.num_topics(); }
  std::optional<std::string> check_invariants() const { return model_.check_invariants(); }

  std::vector<std::pair<std::string, double>> top_keywords(std::size_t topic, std::size_t n) const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& kw : lda::top_keywords(model_, topic, n).items) out.emplace_back(kw.word, kw.weight);
    return out;
  }

  double coherence(std::size_t top_n, const std::string& metric) const {
    return lda::coherence(model_, docs_.bow, top_n, lda::parse_metric(metric));
  }

 private:
  Documents docs_;
  lda::TopicModel model_;
};

}  // namespace

PYBIND11_MODULE(corpuslens, m) {
  m.doc() = "Topic modelling and phraseology over tokenised corpora";

  static py::exception<Error> error_type(m, "CorpuslensError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(py::str(std::string(e.code_name()) + ": " + e.detail()));
      exc.attr("code") = std::string(e.code_name());
      exc.attr("detail") = e.detail();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<Concordancer>(m, "Concordancer")
      .def(py::init<const std::vector<TaggedDoc>&, const std::string&, const std::optional<std::vector<std::string>>&>(),
           py::arg("docs"), py::arg("lang") = "en", py::arg("ids") = py::none())
      .def("frequency", &Concordancer::frequency, py::arg("form"))
      .def("kwic", &Concordancer::kwic, py::arg("node"), py::arg("window") = phrase::kDefaultWindow,
           py::arg("limit") = py::none())
      .def("collocates", &Concordancer::collocates, py::arg("node"), py::arg("window") = phrase::kDefaultWindow,
           py::arg("min_freq") = 1, py::arg("measure") = "raw")
      .def("match", &Concordancer::match, py::arg("pattern"), py::arg("node"), py::arg("name") = "pattern");

  py::class_<Model>(m, "TopicModel")
      .def_property_readonly("num_topics", &Model::num_topics)
      .def("check_invariants", &Model::check_invariants)
      .def("top_keywords", &Model::top_keywords, py::arg("topic"), py::arg("n") = 10)
      .def("coherence", &Model::coherence, py::arg("top_n") = 10, py::arg("metric") = "umass");

  m.def(
      "train_lda",
      [](const std::vector<std::vector<std::string>>& docs, std::size_t k, std::size_t iterations, std::size_t burn_in,
         std::uint64_t seed, std::optional<double> alpha, double beta) {
        auto d = bag_of_words(docs);
        const auto cfg = lda_config(k, iterations, burn_in, seed, alpha, beta);
        py::gil_scoped_release release;
        auto model = lda::train_lda(d.bow, d.vocab, cfg);
        return Model(std::move(d), std::move(model));
      },
      py::arg("docs"), py::arg("k"), py::arg("iterations") = 1000, py::arg("burn_in") = 200, py::arg("seed") = 42,
      py::arg("alpha") = py::none(), py::arg("beta") = 0.01);

  m.def(
      "sweep",
      [](const std::vector<std::vector<std::string>>& docs, std::size_t kmin, std::size_t kmax, std::size_t iterations,
         std::size_t burn_in, std::uint64_t seed, std::optional<double> alpha, std::size_t top_n,
         const std::string& metric) {
        const auto d = bag_of_words(docs);
        const auto cfg = lda_config(kmin, iterations, burn_in, seed, alpha, 0.01);
        const auto which = lda::parse_metric(metric);
        lda::CoherenceCurve curve;
        {
          py::gil_scoped_release release;
          curve = lda::sweep_topic_count(d.bow, d.vocab, kmin, kmax, cfg, top_n, which);
        }
        std::vector<std::pair<std::size_t, double>> points;
        for (const auto& p : curve.points) points.emplace_back(p.k, p.score);
        py::dict out;
        out["points"] = points;
        out["best_k"] = curve.best_k;
        out["csv"] = curve.to_csv();
        return out;
      },
      py::arg("docs"), py::arg("kmin"), py::arg("kmax"), py::arg("iterations") = 200, py::arg("burn_in") = 100,
      py::arg("seed") = 42, py::arg("alpha") = py::none(), py::arg("top_n") = 10, py::arg("metric") = "umass");

  m.def(
      "keyword_occurrences",
      [](const std::string& title, const std::string& body, const std::vector<std::string>& keywords) {
        Document d;
        d.title = title;
        d.body = body;
        return keyword_occurrences(d, keywords);
      },
      py::arg("title"), py::arg("body"), py::arg("keywords"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv = {"corpuslens"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
