#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "spellforge/cluster.hpp"
#include "spellforge/csv.hpp"
#include "spellforge/features.hpp"
#include "spellforge/learners.hpp"
#include "spellforge/selection.hpp"
#include "spellforge/synth.hpp"
#include "spellforge/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace spellforge;

namespace {

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "missing";
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char out[20];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

struct ManifestWriter {
  std::string command;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::string> outputs;  // digested at write time
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void add_input(const std::string& path) { inputs.emplace_back(path, file_digest(path)); }
  void add_output(const std::string& name) { outputs.push_back(name); }

  void write() const {
    json j;
    j["command"] = command;
    j["tool_version"] = "1.0.0";
    j["seed"] = seed;
    json in = json::object();
    for (const auto& [p, d] : inputs) in[p] = d;
    j["input_digests"] = in;
    json outs = json::object();
    for (const auto& name : outputs) outs[name] = file_digest(out_dir + "/" + name);
    j["output_digests"] = outs;
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - start)
                  .count();
    j["elapsed_ms"] = ms;
    std::ofstream out(out_dir + "/manifest.json");
    out << j.dump(1) << '\n';
  }
};

struct AuxTable {
  std::vector<std::string> person_ids;
  std::vector<double> any_is, unemployment, always_on;
};

void write_aux(const std::string& path, const AuxTable& t) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write '" + path + "'");
  out << "person_id,outcome_any_is,outcome_unemployment,always_on_share\n";
  char buf[128];
  for (std::size_t i = 0; i < t.person_ids.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g", t.person_ids[i].c_str(),
                  t.any_is[i], t.unemployment[i], t.always_on[i]);
    out << buf << '\n';
  }
}

AuxTable read_aux(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw CsvError("'" + path + "': empty file");
  AuxTable t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = csv::split_line(line);
    if (f.size() != 4) throw CsvError("'" + path + "': expected 4 fields");
    t.person_ids.push_back(f[0]);
    t.any_is.push_back(std::stod(f[1]));
    t.unemployment.push_back(std::stod(f[2]));
    t.always_on.push_back(std::stod(f[3]));
  }
  return t;
}

ObservationWindow parse_year_range(const std::string& range) {
  auto dash = range.find('-');
  if (dash == std::string::npos)
    throw std::invalid_argument("expected a year range like 2011-2014");
  int y0 = std::stoi(range.substr(0, dash));
  int y1 = std::stoi(range.substr(dash + 1));
  return ObservationWindow(Date::from_ymd(y0, 1, 1), Date::from_ymd(y1, 12, 31));
}

int run_synth(const std::string& config_path, const std::string& out_dir,
              std::uint64_t seed_override, bool seed_set, int threads) {
  DgpConfig cfg = load_dgp_json(config_path);
  if (seed_set) cfg.seed = seed_override;
  fs::create_directories(out_dir);
  ManifestWriter mw{"synth", out_dir, cfg.seed};
  mw.add_input(config_path);
  SynthCohort cohort = generate(cfg, threads);
  write_cohort(out_dir, cohort);
  mw.add_output("spells.csv");
  mw.add_output("persons.csv");
  mw.add_output("truth.csv");
  mw.write();
  return 0;
}

int run_features(const std::string& spells_path, const std::string& persons_path,
                 const std::string& catalog_path, const std::string& links_path,
                 const std::string& out_dir, const std::string& always_range,
                 int threads) {
  auto spells = read_spells_csv(spells_path);
  auto attrs = read_persons_csv(persons_path);
  auto persons = assemble_histories(spells, attrs);
  FeatureCatalog catalog =
      catalog_path.empty() ? default_catalog() : load_catalog_json(catalog_path);

  DeriveContext ctx;
  std::vector<ParentLink> links;
  std::unordered_map<std::string, const PersonHistory*> by_id;
  if (!links_path.empty()) {
    links = read_parent_links_csv(links_path);
    for (const auto& p : persons) by_id[p.person_id] = &p;
    ctx.parent_links = &links;
    ctx.persons_by_id = &by_id;
  }

  fs::create_directories(out_dir);
  ManifestWriter mw{"features", out_dir, 0};
  mw.add_input(spells_path);
  mw.add_input(persons_path);
  if (!catalog_path.empty()) mw.add_input(catalog_path);

  FeatureMatrix m = build_matrix(persons, catalog, ctx, threads);
  write_features_csv(out_dir + "/features.csv", m);

  AuxTable aux;
  ObservationWindow always_w = parse_year_range(always_range);
  const auto any_is = SpellFilter::any_income_support();
  const auto unemp = SpellFilter::subfamily(PaymentSubfamily::kUnemployment);
  for (const auto& p : persons) {
    aux.person_ids.push_back(p.person_id);
    aux.any_is.push_back(outcome_proportion(p, outcome_window(), any_is));
    aux.unemployment.push_back(outcome_proportion(p, outcome_window(), unemp));
    aux.always_on.push_back(outcome_proportion(p, always_w, any_is));
  }
  write_aux(out_dir + "/outcomes.csv", aux);
  mw.add_output("features.csv");
  mw.add_output("outcomes.csv");
  mw.write();
  return 0;
}

struct TrainData {
  FeatureMatrix X;
  Eigen::VectorXd y;
  std::vector<std::string> person_ids;
};

TrainData load_train_data(const std::string& features_path,
                          const std::string& outcomes_path,
                          const std::string& outcome_name, bool exclude_always_on) {
  FeatureMatrix X = read_features_csv(features_path);
  AuxTable aux = read_aux(outcomes_path);
  if (static_cast<Eigen::Index>(aux.person_ids.size()) != X.rows())
    throw std::invalid_argument("features and outcomes row counts differ");
  const std::vector<double>& yv =
      outcome_name == "unemployment" ? aux.unemployment : aux.any_is;
  std::vector<int> keep;
  for (std::size_t i = 0; i < aux.person_ids.size(); ++i)
    if (!exclude_always_on || aux.always_on[i] < 1.0)
      keep.push_back(static_cast<int>(i));
  TrainData d;
  d.X.names = X.names;
  d.X.values.resize(static_cast<Eigen::Index>(keep.size()), X.cols());
  d.y.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    d.X.values.row(static_cast<Eigen::Index>(i)) = X.values.row(keep[i]);
    d.y(static_cast<Eigen::Index>(i)) = yv[static_cast<std::size_t>(keep[i])];
    d.person_ids.push_back(aux.person_ids[static_cast<std::size_t>(keep[i])]);
  }
  return d;
}

int run_train(const std::string& features_path, const std::string& outcomes_path,
              const std::string& ladder_path, const std::string& out_dir,
              std::uint64_t seed, const std::string& outcome_name,
              const std::string& exclude_range, int threads) {
  if (!exclude_range.empty()) parse_year_range(exclude_range);  // validated
  TrainData d = load_train_data(features_path, outcomes_path, outcome_name,
                                !exclude_range.empty());
  Ladder ladder = load_ladder_json(ladder_path);

  fs::create_directories(out_dir);
  ManifestWriter mw{"train", out_dir, seed};
  mw.add_input(features_path);
  mw.add_input(outcomes_path);
  mw.add_input(ladder_path);

  SplitPlan plan =
      split_train_holdout(static_cast<int>(d.X.rows()), 0.8, derive_seed(seed, 1, 0));
  LadderRun run = run_model_ladder(d.X, d.y, plan, ladder, seed, threads);
  save_report_json(out_dir + "/report.json", run.reports);
  mw.add_output("report.json");
  for (std::size_t i = 0; i < ladder.models.size(); ++i) {
    if (ladder.models[i].kind == LearnerSpec::Kind::kEnsemble) continue;
    save_model_json(out_dir + "/model_" + ladder.models[i].name + ".json",
                    run.models[i]);
    mw.add_output("model_" + ladder.models[i].name + ".json");
  }
  mw.write();
  return 0;
}

int run_evaluate(const std::string& model_path, const std::string& features_path,
                 const std::string& outcomes_path, const std::string& out_dir,
                 std::uint64_t seed, const std::string& outcome_name) {
  TrainData d = load_train_data(features_path, outcomes_path, outcome_name, false);
  TrainedModel m = load_model_json(model_path);
  fs::create_directories(out_dir);
  ManifestWriter mw{"evaluate", out_dir, seed};
  mw.add_input(model_path);
  mw.add_input(features_path);
  mw.add_input(outcomes_path);
  Eigen::VectorXd pred = predict(m, d.X);
  json j;
  j["mse"] = mse(d.y, pred);
  auto r2 = r_squared_corr(d.y, pred);
  if (r2) j["r_squared"] = *r2;
  auto [lo, hi] = bootstrap_ci(d.y, pred, 1000, 0.95, derive_seed(seed, 2, 0));
  j["ci_low"] = lo;
  j["ci_high"] = hi;
  j["n"] = static_cast<int>(d.y.size());
  std::ofstream out(out_dir + "/eval.json");
  out << j.dump(1) << '\n';
  mw.add_output("eval.json");
  mw.write();
  return 0;
}

int run_cluster(const std::string& model_path, const std::string& features_path,
                const std::string& out_dir, double threshold,
                const std::string& linkage_str, int k_max, int max_rows,
                std::uint64_t seed, int threads) {
  FeatureMatrix X = read_features_csv(features_path);
  TrainedModel m = load_model_json(model_path);
  fs::create_directories(out_dir);
  ManifestWriter mw{"cluster", out_dir, seed};
  mw.add_input(model_path);
  mw.add_input(features_path);

  Eigen::VectorXd pred = predict(m, X);
  std::vector<int> at_risk;
  for (Eigen::Index i = 0; i < pred.size(); ++i)
    if (pred(i) > threshold) at_risk.push_back(static_cast<int>(i));

  json j;
  j["threshold"] = threshold;
  j["n_at_risk"] = static_cast<int>(at_risk.size());
  if (at_risk.size() < 2) {
    j["groups"] = json::array();
    std::ofstream out(out_dir + "/clusters.json");
    out << j.dump(1) << '\n';
    std::ofstream csv_out(out_dir + "/clusters_summary.csv");
    csv_out << "group,size,variable,mean,sd\n";
    mw.add_output("clusters.json");
    mw.add_output("clusters_summary.csv");
    mw.write();
    return 0;
  }
  if (max_rows > 0 && static_cast<int>(at_risk.size()) > max_rows) {
    Rng rng(derive_seed(seed, 3, 0));
    shuffle_portable(at_risk, rng);
    at_risk.resize(static_cast<std::size_t>(max_rows));
    std::sort(at_risk.begin(), at_risk.end());
  }

  FeatureMatrix sub;
  sub.names = X.names;
  sub.values.resize(static_cast<Eigen::Index>(at_risk.size()), X.cols());
  for (std::size_t i = 0; i < at_risk.size(); ++i)
    sub.values.row(static_cast<Eigen::Index>(i)) = X.values.row(at_risk[i]);

  RescaleResult rs = rescale_unit(sub);
  Linkage linkage = linkage_from_name(linkage_str);
  Dendrogram d = agglomerate(rs.values, linkage, threads);
  int kmax = std::min<int>(k_max, static_cast<int>(at_risk.size()) - 1);
  KSelection sel = select_k(d, rs.values, kmax);
  auto labels = cut(d, sel.recommended);
  ClusterReport rep = group_summary(rs.values, sub.names, labels);

  j["linkage"] = linkage_name(linkage);
  j["recommended_k"] = sel.recommended;
  j["low_confidence"] = sel.low_confidence;
  json idx = json::array();
  for (std::size_t t = 0; t < sel.k_values.size(); ++t) {
    json row;
    row["k"] = sel.k_values[t];
    if (sel.pseudo_f[t].infinite)
      row["pseudo_f"] = "infinite";
    else
      row["pseudo_f"] = sel.pseudo_f[t].value;
    const auto& dh = sel.duda[t].front();
    if (dh.defined) {
      row["duda_hart_ratio"] = dh.ratio;
      if (std::isfinite(dh.pseudo_t2))
        row["pseudo_t2"] = dh.pseudo_t2;
      else
        row["pseudo_t2"] = "infinite";
    }
    idx.push_back(std::move(row));
  }
  j["index_table"] = std::move(idx);
  json rows = json::array();
  for (int i : at_risk) rows.push_back(i);
  j["rows"] = std::move(rows);
  json jl = json::array();
  for (int l : labels) jl.push_back(l);
  j["labels"] = std::move(jl);
  json groups = json::array();
  for (const auto& g : rep.groups) {
    json jg;
    jg["group"] = g.group;
    jg["size"] = g.size;
    jg["suppressed"] = g.suppressed;
    groups.push_back(std::move(jg));
  }
  j["groups"] = std::move(groups);
  std::ofstream out(out_dir + "/clusters.json");
  out << j.dump(1) << '\n';

  std::ofstream csv_out(out_dir + "/clusters_summary.csv");
  csv_out << "group,size,variable,mean,sd\n";
  char buf[160];
  for (const auto& g : rep.groups) {
    if (g.suppressed) {
      std::snprintf(buf, sizeof(buf), "%d,%d,suppressed,,", g.group, g.size);
      csv_out << buf << '\n';
      continue;
    }
    for (std::size_t v = 0; v < rep.variables.size(); ++v) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%s,%.17g,%.17g", g.group, g.size,
                    rep.variables[v].c_str(), g.mean[v], g.sd[v]);
      csv_out << buf << '\n';
    }
  }
  mw.add_output("clusters.json");
  mw.add_output("clusters_summary.csv");
  mw.write();
  return 0;
}

int run_report(const std::string& report_path, const std::string& outcomes_path,
               const std::string& out_dir, const std::string& outcome_name) {
  auto reports = load_report_json(report_path);
  if (reports.empty()) throw std::invalid_argument("report has no models");
  std::string table;
  char line[160];
  std::snprintf(line, sizeof(line), "%-28s %10s %10s %19s %8s\n", "Model",
                "Predictors", "MSE", "95% C.I.", "R2");
  table += line;
  for (const auto& r : reports) {
    char ci[32];
    std::snprintf(ci, sizeof(ci), "[%.3f, %.3f]", r.ci_low, r.ci_high);
    if (r.r_squared)
      std::snprintf(line, sizeof(line), "%-28s %10d %10.3f %19s %7.1f%%\n",
                    r.name.c_str(), r.n_predictors, r.mse, ci, *r.r_squared * 100.0);
    else
      std::snprintf(line, sizeof(line), "%-28s %10d %10.3f %19s %8s\n",
                    r.name.c_str(), r.n_predictors, r.mse, ci, "n/a");
    table += line;
  }
  std::fputs(table.c_str(), stdout);
  fs::create_directories(out_dir);
  std::ofstream txt(out_dir + "/report.txt");
  txt << table;
  if (!outcomes_path.empty()) {
    AuxTable aux = read_aux(outcomes_path);
    const auto& yv = outcome_name == "unemployment" ? aux.unemployment : aux.any_is;
    const int bins = 50;
    std::vector<int> counts(bins, 0);
    int zeros = 0, ones = 0;
    for (double v : yv) {
      if (v == 0.0) {
        ++zeros;
      } else if (v == 1.0) {
        ++ones;
      } else {
        int b = std::min(bins - 1, static_cast<int>(v * bins));
        ++counts[static_cast<std::size_t>(b)];
      }
    }
    fs::create_directories(out_dir);
    std::ofstream hist(out_dir + "/histogram.csv");
    hist << "bin,lo,hi,count\n";
    hist << "mass_0,0,0," << zeros << '\n';
    char buf[96];
    for (int b = 0; b < bins; ++b) {
      std::snprintf(buf, sizeof(buf), "bin_%02d,%.3f,%.3f,%d", b,
                    static_cast<double>(b) / bins, static_cast<double>(b + 1) / bins,
                    counts[static_cast<std::size_t>(b)]);
      hist << buf << '\n';
    }
    hist << "mass_1,1,1," << ones << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"welfare-dynamics prediction pipeline"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir = ".";
  std::string outcome_name = "any-is";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "master random seed");
    cmd->add_option("--threads", threads, "worker threads (0 = auto)");
    cmd->add_option("--out", out_dir, "output directory");
  };

  // synth
  std::string dgp_path;
  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  synth->add_option("config", dgp_path, "dgp.json config")->required();
  add_common(synth);
  bool seed_given = false;
  synth->callback([&] { seed_given = synth->count("--seed") > 0; });

  // features
  std::string spells_path, persons_path, catalog_path, links_path;
  std::string always_range = "2011-2014";
  auto* feat = app.add_subcommand("features", "derive the predictor matrix");
  feat->add_option("--spells", spells_path, "spells.csv")->required();
  feat->add_option("--persons", persons_path, "persons.csv")->required();
  feat->add_option("--catalog", catalog_path, "catalog.json (default: built-in)");
  feat->add_option("--parent-links", links_path, "parent_links.csv");
  feat->add_option("--always-on-range", always_range,
                   "year range for the always-on share column");
  add_common(feat);

  // train
  std::string features_path, outcomes_path, ladder_path, exclude_range;
  auto* train = app.add_subcommand("train", "run the model ladder");
  train->add_option("--features", features_path, "features.csv")->required();
  train->add_option("--outcomes", outcomes_path, "outcomes.csv")->required();
  train->add_option("--ladder", ladder_path, "ladder.json")->required();
  train->add_option("--outcome", outcome_name, "any-is | unemployment")
      ->check(CLI::IsMember({"any-is", "unemployment"}));
  train->add_option("--exclude-always-on", exclude_range,
                    "drop rows fully on income support over this year range");
  add_common(train);

  // evaluate
  std::string model_path;
  auto* eval = app.add_subcommand("evaluate", "evaluate a saved model");
  eval->add_option("--model", model_path, "model.json")->required();
  eval->add_option("--features", features_path, "features.csv")->required();
  eval->add_option("--outcomes", outcomes_path, "outcomes.csv")->required();
  eval->add_option("--outcome", outcome_name, "any-is | unemployment")
      ->check(CLI::IsMember({"any-is", "unemployment"}));
  add_common(eval);

  // cluster
  double threshold = 0.9;
  std::string linkage_str = "ward";
  int k_max = 10;
  int max_rows = 3000;
  auto* clus = app.add_subcommand("cluster", "group predicted at-risk individuals");
  clus->add_option("--model", model_path, "model.json")->required();
  clus->add_option("--features", features_path, "features.csv")->required();
  clus->add_option("--threshold", threshold, "at-risk prediction threshold");
  clus->add_option("--linkage", linkage_str, "ward | average | complete")
      ->check(CLI::IsMember({"ward", "average", "complete"}));
  clus->add_option("--k-max", k_max, "largest group count to evaluate");
  clus->add_option("--max-rows", max_rows, "subsample cap for the at-risk set");
  add_common(clus);

  // report
  std::string report_path;
  auto* rep = app.add_subcommand("report", "render a training report");
  rep->add_option("--report", report_path, "report.json")->required();
  rep->add_option("--outcomes", outcomes_path, "outcomes.csv for the histogram");
  rep->add_option("--outcome", outcome_name, "any-is | unemployment")
      ->check(CLI::IsMember({"any-is", "unemployment"}));
  add_common(rep);

  CLI11_PARSE(app, argc, argv);

  try {
    int t = resolve_threads(threads);
    if (synth->parsed())
      return run_synth(dgp_path, out_dir, seed, seed_given, t);
    if (feat->parsed())
      return run_features(spells_path, persons_path, catalog_path, links_path, out_dir,
                          always_range, t);
    if (train->parsed())
      return run_train(features_path, outcomes_path, ladder_path, out_dir, seed,
                       outcome_name, exclude_range, t);
    if (eval->parsed())
      return run_evaluate(model_path, features_path, outcomes_path, out_dir, seed,
                          outcome_name);
    if (clus->parsed())
      return run_cluster(model_path, features_path, out_dir, threshold, linkage_str,
                         k_max, max_rows, seed, t);
    if (rep->parsed())
      return run_report(report_path, outcomes_path, out_dir, outcome_name);
  } catch (const NumericalFailure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
