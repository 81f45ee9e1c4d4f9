#pragma once

// The fixscope command line. Exit codes: 0 ok, 1 domain error, 2 usage.

#include <signal.h>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fixscope/fixscope.hpp"

namespace fixscope::cli {

using nlohmann::json;

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool quiet = false;
  std::string format = "json";
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::vector<SubmissionPair> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path);
  return read_corpus(in);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

inline std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

inline std::vector<std::string> names_of(std::initializer_list<std::string_view> xs) {
  return {xs.begin(), xs.end()};
}

// Split spec recorded in a model, so evaluate reuses the training split.
inline SplitSpec split_from(const json& provenance, const Globals& g) {
  SplitSpec s;
  s.seed = g.seed;
  if (!g.seed_given && provenance.contains("split_seed")) s.seed = provenance.at("split_seed").get<std::uint64_t>();
  return s;
}

inline std::vector<SubmissionPair> select_split(const std::vector<SubmissionPair>& corpus, const std::string& which,
                                                const SplitSpec& spec) {
  if (which == "all") return corpus;
  Split<SubmissionPair> s = split<SubmissionPair>(corpus, spec);
  if (which == "train") return s.train;
  if (which == "validation") return s.validation;
  return s.test;
}

inline void print_prediction_text(std::ostream& out, const Prediction& p) {
  out << (p.label ? *p.label : std::string("Unknown")) << "  confidence " << p.confidence << "  nearest "
      << p.nearest_distance << "  (" << to_string(p.method) << ")\n";
  for (const auto& e : p.evidence)
    out << "  cluster " << e.cluster_id << "  " << e.script_id << "  d=" << e.distance << '\n';
}

inline int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cluster and classify student code fixes by their edit scripts.", "fixscope"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->each([&](const std::string&) { g.seed_given = true; });
  app.add_flag("--quiet", g.quiet, "suppress warnings and progress");
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"json", "text"}));
  app.fallthrough();

  const auto metrics = names_of({"JACCARD", "BOW_COSINE", "AE_COSINE"});
  const auto schemes = names_of({"KIND", "KIND_TYPE", "KIND_TYPE_LABEL", "KIND_TYPE_LABEL_PARENT"});
  const auto linkages = names_of({"single", "complete", "average"});
  const auto methods = names_of({"nearest", "knn", "NEAREST_CLUSTER", "KNN"});
  auto warn = [&](const std::string& m) {
    if (!g.quiet) err << "warning: " << m << '\n';
  };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a JSONL corpus and optionally normalise it");
  std::string ingest_corpus, ingest_out;
  bool ingest_trees = false;
  ingest->add_option("--corpus", ingest_corpus, "input corpus (JSONL)")->required();
  ingest->add_option("-o,--output", ingest_out, "write the normalised corpus here");
  ingest->add_flag("--trees", ingest_trees, "store serialized trees instead of source text");

  // diff
  auto* diffc = app.add_subcommand("diff", "print the edit script between two programs");
  std::string diff_src, diff_dst;
  MatcherParams diff_mp;
  diffc->add_option("src", diff_src, "source program (MiniLang or serialized tree)")->required();
  diffc->add_option("dst", diff_dst, "destination program")->required();
  diffc->add_option("--min-height", diff_mp.min_height)->check(CLI::PositiveNumber);
  diffc->add_option("--min-dice", diff_mp.min_dice)->check(CLI::Range(0.0, 1.0));
  diffc->add_option("--max-recovery", diff_mp.max_recovery_size)->check(CLI::NonNegativeNumber);

  // cluster
  auto* cluster = app.add_subcommand("cluster", "train a model from a corpus");
  std::string cl_corpus, cl_out, cl_metric = "JACCARD", cl_scheme = "KIND_TYPE", cl_linkage = "average",
                                 cl_split = "train";
  TrainConfig tc;
  bool cl_auto = false;
  cluster->add_option("--corpus", cl_corpus)->required();
  cluster->add_option("--metric", cl_metric)->check(CLI::IsMember(metrics));
  cluster->add_option("--scheme", cl_scheme)->check(CLI::IsMember(schemes));
  cluster->add_option("--linkage", cl_linkage)->check(CLI::IsMember(linkages));
  cluster->add_option("--cut", tc.cut)->check(CLI::Range(0.0, 1.0));
  cluster->add_option("--min-size", tc.min_size)->check(CLI::PositiveNumber);
  cluster->add_option("--min-df", tc.distance.min_df)->check(CLI::PositiveNumber);
  cluster->add_option("--hidden", tc.distance.autoencoder.hidden_dim)->check(CLI::PositiveNumber);
  cluster->add_option("--epochs", tc.distance.autoencoder.epochs)->check(CLI::NonNegativeNumber);
  cluster->add_option("--min-height", tc.matcher.min_height)->check(CLI::PositiveNumber);
  cluster->add_option("--min-dice", tc.matcher.min_dice)->check(CLI::Range(0.0, 1.0));
  cluster->add_option("--split", cl_split, "which pairs to train on")->check(CLI::IsMember({"train", "all"}));
  cluster->add_flag("--auto-label", cl_auto, "label clusters by majority ground truth");
  cluster->add_option("-o,--output", cl_out)->required();

  // label
  auto* label = app.add_subcommand("label", "list clusters for labelling, or set one label");
  std::string lb_model = env_or("FIXSCOPE_MODEL", ""), lb_set;
  int lb_cluster = -1, lb_show = 2;
  bool lb_clear = false;
  label->add_option("--model", lb_model, "model file (default $FIXSCOPE_MODEL)");
  label->add_option("--cluster", lb_cluster, "cluster id to label or show");
  label->add_option("--set", lb_set, "label to assign");
  label->add_flag("--clear", lb_clear, "remove the cluster's label");
  label->add_option("--show", lb_show, "member pairs printed per cluster")->check(CLI::NonNegativeNumber);

  // serve
  auto* serve = app.add_subcommand("serve", "serve the HTTP API");
  std::string sv_model = env_or("FIXSCOPE_MODEL", ""), sv_bind = env_or("FIXSCOPE_BIND", "127.0.0.1:8642"),
              sv_static, sv_cors;
  serve->add_option("--model", sv_model, "model file (default $FIXSCOPE_MODEL)");
  serve->add_option("--bind", sv_bind, "host:port (default $FIXSCOPE_BIND or 127.0.0.1:8642)");
  serve->add_option("--static-dir", sv_static, "directory of UI assets");
  serve->add_option("--cors-origin", sv_cors, "allow this browser origin");

  // classify
  auto* classifyc = app.add_subcommand("classify", "classify one incorrect submission");
  std::string cf_model = env_or("FIXSCOPE_MODEL", ""), cf_input, cf_method;
  std::optional<int> cf_k;
  std::optional<double> cf_theta, cf_delta, cf_eps;
  classifyc->add_option("--model", cf_model, "model file (default $FIXSCOPE_MODEL)");
  classifyc->add_option("--input", cf_input, "submission (MiniLang or serialized tree)")->required();
  classifyc->add_option("--method", cf_method)->check(CLI::IsMember(methods));
  classifyc->add_option("--k", cf_k)->check(CLI::PositiveNumber);
  classifyc->add_option("--theta", cf_theta, "confidence threshold")->check(CLI::Range(0.0, 1.0));
  classifyc->add_option("--delta", cf_delta, "distance threshold")->check(CLI::Range(0.0, 1.0));
  classifyc->add_option("--epsilon", cf_eps, "kNN vote epsilon")->check(CLI::PositiveNumber);

  // evaluate
  auto* evaluatec = app.add_subcommand("evaluate", "PR curve of a model on a corpus split");
  std::string ev_model = env_or("FIXSCOPE_MODEL", ""), ev_corpus, ev_split = "test", ev_curve;
  std::optional<double> ev_delta;
  evaluatec->add_option("--model", ev_model, "model file (default $FIXSCOPE_MODEL)");
  evaluatec->add_option("--corpus", ev_corpus)->required();
  evaluatec->add_option("--split", ev_split)->check(CLI::IsMember({"train", "validation", "test", "all"}));
  evaluatec->add_option("--curve", ev_curve, "write theta,recall,precision CSV");
  evaluatec->add_option("--delta", ev_delta, "distance threshold (default: the model's)")
      ->check(CLI::Range(0.0, 1.0));

  // sweep
  auto* sweepc = app.add_subcommand("sweep", "grid search on the validation split");
  std::string sw_corpus, sw_grid, sw_out, sw_best;
  std::optional<std::size_t> sw_budget;
  unsigned sw_threads = 0;
  sweepc->add_option("--corpus", sw_corpus)->required();
  sweepc->add_option("--grid", sw_grid, "grid file (TOML); defaults to a single combination");
  sweepc->add_option("-o,--output", sw_out, "results CSV")->required();
  sweepc->add_option("--budget", sw_budget, "evaluate only the first N combinations")->check(CLI::PositiveNumber);
  sweepc->add_option("--threads", sw_threads);
  sweepc->add_option("--best-model", sw_best, "retrain the best config and save it here");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted errors");
  int sy_n = 250;
  std::string sy_out, sy_prefix = "p";
  std::vector<std::string> sy_ops;
  synth->add_option("-n", sy_n, "number of pairs")->check(CLI::PositiveNumber);
  synth->add_option("-o,--output", sy_out)->required();
  synth->add_option("--operators", sy_ops, "operator ids (default: the standard four)")->delimiter(',');
  synth->add_option("--id-prefix", sy_prefix);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  auto need_model = [&](const std::string& m) {
    if (m.empty()) throw CLI::RequiredError("--model (or FIXSCOPE_MODEL)");
    return m;
  };

  try {
    const bool js = g.format == "json";

    if (*ingest) {
      auto corpus = read_corpus_file(ingest_corpus);
      std::map<std::string, int> labels;
      std::set<std::string> problems;
      for (const auto& p : corpus) {
        problems.insert(p.problem_id);
        ++labels[p.ground_truth_label.value_or("")];
      }
      if (!ingest_out.empty()) {
        auto o = open_out(ingest_out);
        for (const auto& p : corpus) {
          json line = corpus_line(p);
          if (ingest_trees) {
            line.erase("incorrect_src");
            line.erase("correct_src");
            line["incorrect_tree"] = write_tree(p.incorrect);
            line["correct_tree"] = write_tree(p.correct);
          }
          o << line.dump() << '\n';
        }
      }
      json lj = json::object();
      for (const auto& [l, n] : labels) lj[l.empty() ? "(none)" : l] = n;
      if (js)
        out << json{{"pairs", corpus.size()}, {"problems", problems.size()}, {"labels", lj}}.dump() << '\n';
      else
        out << corpus.size() << " pairs, " << problems.size() << " problems\n";
      return 0;
    }

    if (*diffc) {
      const EditScript s = diff(load_tree_text(read_file(diff_src)), load_tree_text(read_file(diff_dst)), diff_mp);
      if (js)
        write_script_jsonl(out, s);
      else
        for (const auto& a : s.actions) out << describe(a) << '\n';
      return 0;
    }

    if (*cluster) {
      tc.distance.metric = parse_metric(cl_metric);
      tc.distance.scheme = parse_scheme(cl_scheme);
      tc.linkage = parse_linkage(cl_linkage);
      tc.distance.autoencoder.seed = g.seed;
      const auto corpus = read_corpus_file(cl_corpus);
      SplitSpec spec;
      spec.seed = g.seed;
      const auto pairs = select_split(corpus, cl_split, spec);
      ClusterModel m = train_model(pairs, tc);
      if (cl_auto) auto_label(m);
      m.provenance = {{"corpus_digest", corpus_digest(corpus)},
                      {"trained_on", cl_split},
                      {"split_seed", g.seed},
                      {"train_config", to_json(tc)}};
      save_model(m, cl_out);
      if (js)
        out << json{{"model", cl_out},
                    {"pairs", pairs.size()},
                    {"clusters", m.clusters.size()},
                    {"unclustered", m.unclustered.size()}}
                   .dump()
            << '\n';
      else
        out << m.clusters.size() << " clusters from " << pairs.size() << " pairs (" << m.unclustered.size()
            << " unclustered) -> " << cl_out << '\n';
      return 0;
    }

    if (*label) {
      const std::string path = need_model(lb_model);
      ClusterModel m = load_model(path);
      if (!lb_set.empty() || lb_clear) {
        if (lb_cluster < 0) throw CLI::RequiredError("--cluster");
        if (!lb_set.empty() && lb_clear) throw CLI::ValidationError("--set and --clear are exclusive");
        assign_label(m, lb_cluster, lb_clear ? "" : lb_set);
        save_model(m, path);
        if (!g.quiet) out << "cluster " << lb_cluster << " -> " << (lb_clear ? "(unlabelled)" : lb_set) << '\n';
        return 0;
      }
      std::vector<const Cluster*> shown;
      if (lb_cluster >= 0)
        shown.push_back(&m.cluster(lb_cluster));
      else
        for (const auto& c : m.clusters) shown.push_back(&c);
      if (js) {
        json arr = json::array();
        for (const Cluster* c : shown) {
          json members = json::array();
          for (int x : c->members) members.push_back(m.items[static_cast<std::size_t>(x)].script_id);
          json actions = json::array();
          for (const auto& a : m.items[static_cast<std::size_t>(c->medoid)].script.actions)
            actions.push_back(describe(a));
          arr.push_back({{"cluster_id", c->cluster_id},
                         {"size", c->members.size()},
                         {"label", c->label ? json(*c->label) : json(nullptr)},
                         {"medoid", m.items[static_cast<std::size_t>(c->medoid)].script_id},
                         {"medoid_actions", actions},
                         {"members", members}});
        }
        out << arr.dump(2) << '\n';
        return 0;
      }
      for (const Cluster* c : shown) {
        const auto& med = m.items[static_cast<std::size_t>(c->medoid)];
        out << "== cluster " << c->cluster_id << "  size " << c->members.size() << "  label "
            << (c->label ? *c->label : std::string("(none)")) << '\n';
        for (const auto& a : med.script.actions) out << "   " << describe(a) << '\n';
        int printed = 0;
        for (int x : c->members) {
          if (printed++ >= lb_show) break;
          const auto& it = m.items[static_cast<std::size_t>(x)];
          out << "  -- " << it.script_id << " incorrect:\n" << it.incorrect_src << "\n  -- correct:\n"
              << it.correct_src << '\n';
        }
      }
      if (!g.quiet) out << "set a label with: fixscope label --model " << path << " --cluster ID --set LABEL\n";
      return 0;
    }

    if (*serve) {
      auto svc = std::make_shared<ModelService>(need_model(sv_model));
      httplib::Server svr;
      ServerOptions opt;
      if (!sv_static.empty()) opt.static_dir = sv_static;
      if (!sv_cors.empty()) opt.cors_origin = sv_cors;
      install_routes(svr, svc, opt);
      const int port = bind_server(svr, sv_bind);
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      std::thread stopper([&] {
        int sig = 0;
        sigwait(&set, &sig);
        svr.stop();
      });
      if (!g.quiet) err << "serving " << svc->path().string() << " on port " << port << '\n';
      svr.listen_after_bind();
      if (stopper.joinable()) {
        pthread_kill(stopper.native_handle(), SIGTERM);
        stopper.join();
      }
      return 0;
    }

    if (*classifyc) {
      const ClusterModel m = load_model(need_model(cf_model));
      ClassifierConfig c = m.classifier;
      if (!cf_method.empty()) c.method = parse_method(cf_method);
      if (cf_k) c.k = *cf_k;
      if (cf_theta) c.confidence_threshold = *cf_theta;
      if (cf_delta) c.distance_threshold = *cf_delta;
      if (cf_eps) c.vote_epsilon = *cf_eps;
      validate(c);
      const Prediction p = classify(load_tree_text(read_file(cf_input)), m, c);
      if (js)
        out << to_json(p).dump() << '\n';
      else
        print_prediction_text(out, p);
      return 0;
    }

    if (*evaluatec) {
      const ClusterModel m = load_model(need_model(ev_model));
      const auto pairs = select_split(read_corpus_file(ev_corpus), ev_split, split_from(m.provenance, g));
      if (pairs.empty()) throw ConfigError("split '" + ev_split + "' is empty");
      const double delta = ev_delta.value_or(m.classifier.distance_threshold);
      const PRCurve c = pr_curve(evaluate(m, pairs, m.classifier), default_thresholds(), delta);
      if (!ev_curve.empty()) {
        auto o = open_out(ev_curve);
        write_curve_csv(o, c);
      }
      if (js) {
        json pts = json::array();
        for (const auto& p : c.points)
          pts.push_back({{"theta", p.theta ? json(*p.theta) : json(nullptr)},
                         {"recall", p.recall},
                         {"precision", p.precision}});
        out << json{{"split", ev_split}, {"items", pairs.size()}, {"pr_auc", c.auc}, {"points", pts}}.dump() << '\n';
      } else {
        out << "PR-AUC " << std::setprecision(6) << c.auc << " on " << pairs.size() << " " << ev_split
            << " pairs\n";
      }
      return 0;
    }

    if (*sweepc) {
      const SweepGrid grid = sw_grid.empty() ? SweepGrid{} : load_grid(sw_grid);
      const auto corpus = read_corpus_file(sw_corpus);
      SplitSpec spec;
      spec.seed = g.seed;
      const auto data = split<SubmissionPair>(corpus, spec);
      SweepOptions so;
      so.budget = sw_budget;
      so.threads = sw_threads;
      if (!g.quiet)
        err << "sweeping " << std::min(grid.size(), sw_budget.value_or(grid.size())) << " of " << grid.size()
            << " combinations\n";
      const SweepResult r = sweep(data, grid, so);
      {
        auto o = open_out(sw_out);
        write_results_csv(o, r);
      }
      const SweepRow& best = r.ranked.front();
      json summary = {{"combinations", r.ranked.size()},
                      {"models_trained", r.models_trained},
                      {"best",
                       {{"index", best.index},
                        {"train_config", to_json(best.config.train)},
                        {"classifier", to_json(best.config.classifier)},
                        {"validation_pr_auc", best.validation_pr_auc}}}};
      if (!sw_best.empty()) {
        TestRun t = best_on_test(best.config, data);
        t.model.provenance = {{"corpus_digest", corpus_digest(corpus)},
                              {"trained_on", "train"},
                              {"split_seed", g.seed},
                              {"sweep_index", best.index},
                              {"grid_size", grid.size()}};
        save_model(t.model, sw_best);
        summary["best"]["test_pr_auc"] = t.curve.auc;
        summary["best_model"] = sw_best;
      }
      if (js)
        out << summary.dump() << '\n';
      else
        out << "best validation PR-AUC " << best.validation_pr_auc << " (combination " << best.index << ")\n";
      return 0;
    }

    if (*synth) {
      std::vector<MutationOperator> ops;
      if (sy_ops.empty()) {
        ops = standard_operators();
      } else {
        std::map<std::string, MutationOperator> all;
        for (auto& op : standard_operators()) all.emplace(op.id, op);
        all.emplace("EXTRA_STATEMENT", extra_statement_operator());
        for (const auto& id : sy_ops) {
          auto it = all.find(id);
          if (it == all.end()) throw CLI::ValidationError("--operators", "unknown operator " + id);
          ops.push_back(it->second);
        }
      }
      SynthOptions so;
      so.id_prefix = sy_prefix;
      so.warn = warn;
      const auto corpus = generate_synthetic_corpus(sy_n, ops, g.seed, so);
      {
        auto o = open_out(sy_out);
        write_corpus(o, corpus);
      }
      if (!g.quiet) {
        if (js)
          out << json{{"pairs", corpus.size()}, {"output", sy_out}}.dump() << '\n';
        else
          out << corpus.size() << " pairs -> " << sy_out << '\n';
      }
      return 0;
    }
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace fixscope::cli
