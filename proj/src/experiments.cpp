#include "zkl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "zkl/bounds.hpp"
#include "zkl/dynamics.hpp"
#include "zkl/error.hpp"
#include "zkl/kernel.hpp"

namespace zkl {

namespace {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Results must be written to
// per-index slots so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string path_of(const std::string& where, const char* key) { return where + "." + key; }

template <typename T>
T get_field(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(path_of(where, key) + ": " + e.what());
  }
}

template <typename T>
std::vector<T> get_list(const json& j, const char* key, const std::string& where, std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& arr = j.at(key);
  if (!arr.is_array()) throw InvalidArgument(path_of(where, key) + ": expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    try {
      out.push_back(arr[i].get<T>());
    } catch (const json::exception& e) {
      throw InvalidArgument(path_of(where, key) + "[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return out;
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw InvalidArgument(field + ": " + what);
}

std::filesystem::path prepare_out_dir(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "run_config.json", config_to_json(cfg).dump(2) + "\n");
  return out_dir;
}

std::string pair_label(std::size_t k, std::size_t o, std::size_t u) {
  return "p" + std::to_string(k) + ":o" + std::to_string(o) + ":u" + std::to_string(u);
}

struct Pair {
  std::string id;
  std::size_t o = 0;
  std::size_t u = 0;
};

std::vector<Pair> make_pairs(std::size_t count, std::size_t n) {
  std::vector<Pair> pairs;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t o = k % n;
    const std::size_t u = (k + n / 2) % n;
    pairs.push_back({pair_label(k, o, u), o, u});
  }
  return pairs;
}

Matrix block_gram(const KernelMatrix& oo, const KernelMatrix& ou, const KernelMatrix& uu) {
  const std::size_t V = oo.dim();
  Matrix g(2 * V, 2 * V);
  for (std::size_t i = 0; i < V; ++i)
    for (std::size_t j = 0; j < V; ++j) {
      g(i, j) = oo.entries(i, j);
      g(i, V + j) = ou.entries(i, j);
      g(V + j, i) = ou.entries(i, j);
      g(V + i, V + j) = uu.entries(i, j);
    }
  return g;
}

std::string dist_name(Distribution d) { return std::string(to_string(d)); }

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_slope: need >= 2 paired points");
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// ---------------------------------------------------------------------------
// configuration

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  if (experiment == "kernel-compare") {
    cfg.seeds.resize(20);
    std::iota(cfg.seeds.begin(), cfg.seeds.end(), std::uint64_t{1});
  } else if (experiment == "trajectory") {
    cfg.model.output_dim = 4;
    cfg.optim.eta = 0.01;
    cfg.optim.mu = 1e-3;
    cfg.optim.steps = 200;
    cfg.P_sweep = {1, 10, 50, 100};
    cfg.distributions = {Distribution::Gaussian};
    cfg.seeds.resize(10);
    std::iota(cfg.seeds.begin(), cfg.seeds.end(), std::uint64_t{1});
  } else if (experiment == "v-scaling") {
    cfg.model.hidden_dims = {1024};
    cfg.distributions = {Distribution::Gaussian};
    cfg.seeds.resize(10);
    std::iota(cfg.seeds.begin(), cfg.seeds.end(), std::uint64_t{1});
  } else if (experiment == "moment-check" || experiment == "jl-budget") {
    // no model-dependent defaults
  } else {
    throw InvalidArgument("config.experiment: unknown experiment '" + experiment + "'");
  }
  return cfg;
}

ExperimentConfig config_from_json(const json& j, const std::string& experiment) {
  const std::string root = "config";
  if (!j.is_object()) throw InvalidArgument(root + ": expected a JSON object");
  const std::string kind = get_field<std::string>(j, "experiment", root, experiment);
  if (kind != experiment) {
    throw InvalidArgument(root + ".experiment: config is for '" + kind + "', command is '" + experiment + "'");
  }
  ExperimentConfig cfg = default_config(experiment);
  cfg.seed = get_field(j, "seed", root, cfg.seed);
  cfg.threads = get_field(j, "threads", root, cfg.threads);
  if (j.contains("model")) {
    // Overlay onto the experiment's default model.
    json merged = mlp_config_to_json(cfg.model);
    if (!j["model"].is_object()) throw InvalidArgument(root + ".model: expected an object");
    merged.update(j["model"]);
    cfg.model = mlp_config_from_json(merged, root + ".model");
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    const std::string where = root + ".data";
    if (!d.is_object()) throw InvalidArgument(where + ": expected an object");
    cfg.data.kind = get_field(d, "kind", where, cfg.data.kind);
    cfg.data.per_class = get_field(d, "per_class", where, cfg.data.per_class);
    cfg.data.separation = get_field(d, "separation", where, cfg.data.separation);
    cfg.data.images = get_field(d, "images", where, cfg.data.images);
    cfg.data.labels = get_field(d, "labels", where, cfg.data.labels);
    cfg.data.normalize = get_field(d, "normalize", where, cfg.data.normalize);
  }
  if (j.contains("optim")) {
    const auto& o = j["optim"];
    const std::string where = root + ".optim";
    if (!o.is_object()) throw InvalidArgument(where + ": expected an object");
    cfg.optim.eta = get_field(o, "eta", where, cfg.optim.eta);
    cfg.optim.mu = get_field(o, "mu", where, cfg.optim.mu);
    cfg.optim.steps = get_field(o, "steps", where, cfg.optim.steps);
  }
  cfg.pairs = get_field(j, "pairs", root, cfg.pairs);
  cfg.P_sweep = get_list(j, "P_sweep", root, cfg.P_sweep);
  if (j.contains("distributions")) {
    auto names = get_list<std::string>(j, "distributions", root, {});
    cfg.distributions.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      try {
        cfg.distributions.push_back(parse_distribution(names[i]));
      } catch (const InvalidArgument& e) {
        throw InvalidArgument(root + ".distributions[" + std::to_string(i) + "]: " + e.what());
      }
    }
  }
  cfg.seeds = get_list(j, "seeds", root, cfg.seeds);
  cfg.V_sweep = get_list(j, "V_sweep", root, cfg.V_sweep);
  cfg.fixed_P = get_field(j, "P", root, cfg.fixed_P);
  cfg.dump_kernels = get_field(j, "dump_kernels", root, cfg.dump_kernels);
  cfg.probes = get_field(j, "probes", root, cfg.probes);
  cfg.fo_control = get_field(j, "fo_control", root, cfg.fo_control);
  if (j.contains("moment")) {
    const auto& m = j["moment"];
    const std::string where = root + ".moment";
    auto& mc = cfg.moment;
    mc.fourth_dim = get_field(m, "fourth_dim", where, mc.fourth_dim);
    mc.fourth_samples = get_field(m, "fourth_samples", where, mc.fourth_samples);
    mc.multi_P = get_list(m, "multi_P", where, mc.multi_P);
    mc.multi_samples = get_field(m, "multi_samples", where, mc.multi_samples);
    mc.second_dim = get_field(m, "second_dim", where, mc.second_dim);
    mc.second_samples = get_field(m, "second_samples", where, mc.second_samples);
    mc.enum_min_dim = get_field(m, "enum_min_dim", where, mc.enum_min_dim);
    mc.enum_max_dim = get_field(m, "enum_max_dim", where, mc.enum_max_dim);
    mc.fourth_tol = get_field(m, "fourth_tol", where, mc.fourth_tol);
    mc.multi_tol = get_field(m, "multi_tol", where, mc.multi_tol);
    mc.second_tol = get_field(m, "second_tol", where, mc.second_tol);
    mc.enum_tol = get_field(m, "enum_tol", where, mc.enum_tol);
    mc.zero_inputs = get_field(m, "zero_inputs", where, mc.zero_inputs);
    mc.tail_epsilon = get_field(m, "tail_epsilon", where, mc.tail_epsilon);
    mc.tail_P = get_list(m, "tail_P", where, mc.tail_P);
    mc.tail_trials = get_field(m, "tail_trials", where, mc.tail_trials);
    mc.tail_dim = get_field(m, "tail_dim", where, mc.tail_dim);
    mc.tail_slack = get_field(m, "tail_slack", where, mc.tail_slack);
    mc.concentration_constant = get_field(m, "c", where, mc.concentration_constant);
  }
  cfg.jl_n = get_field(j, "n", root, cfg.jl_n);
  cfg.jl_epsilon = get_field(j, "epsilon", root, cfg.jl_epsilon);
  cfg.jl_delta = get_field(j, "delta", root, cfg.jl_delta);
  cfg.jl_c = get_field(j, "c", root, cfg.jl_c);
  validate(cfg);
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json dists = json::array();
  for (auto d : cfg.distributions) dists.push_back(dist_name(d));
  const auto& mc = cfg.moment;
  return json{
      {"experiment", cfg.experiment},
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"model", mlp_config_to_json(cfg.model)},
      {"data",
       {{"kind", cfg.data.kind},
        {"per_class", cfg.data.per_class},
        {"separation", cfg.data.separation},
        {"images", cfg.data.images},
        {"labels", cfg.data.labels},
        {"normalize", cfg.data.normalize}}},
      {"optim", {{"eta", cfg.optim.eta}, {"mu", cfg.optim.mu}, {"steps", cfg.optim.steps}}},
      {"pairs", cfg.pairs},
      {"P_sweep", cfg.P_sweep},
      {"distributions", dists},
      {"seeds", cfg.seeds},
      {"V_sweep", cfg.V_sweep},
      {"P", cfg.fixed_P},
      {"dump_kernels", cfg.dump_kernels},
      {"probes", cfg.probes},
      {"fo_control", cfg.fo_control},
      {"moment",
       {{"fourth_dim", mc.fourth_dim},
        {"fourth_samples", mc.fourth_samples},
        {"multi_P", mc.multi_P},
        {"multi_samples", mc.multi_samples},
        {"second_dim", mc.second_dim},
        {"second_samples", mc.second_samples},
        {"enum_min_dim", mc.enum_min_dim},
        {"enum_max_dim", mc.enum_max_dim},
        {"fourth_tol", mc.fourth_tol},
        {"multi_tol", mc.multi_tol},
        {"second_tol", mc.second_tol},
        {"enum_tol", mc.enum_tol},
        {"zero_inputs", mc.zero_inputs},
        {"tail_epsilon", mc.tail_epsilon},
        {"tail_P", mc.tail_P},
        {"tail_trials", mc.tail_trials},
        {"tail_dim", mc.tail_dim},
        {"tail_slack", mc.tail_slack},
        {"c", mc.concentration_constant}}},
      {"n", cfg.jl_n},
      {"epsilon", cfg.jl_epsilon},
      {"delta", cfg.jl_delta},
      {"c", cfg.jl_c},
  };
}

void validate(const ExperimentConfig& cfg) {
  const std::string root = "config";
  require(cfg.threads >= 1, root + ".threads", "must be >= 1");
  try {
    cfg.model.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(root + ".model: " + e.what());
  }
  require(cfg.data.kind == "blobs" || cfg.data.kind == "idx", root + ".data.kind", "must be 'blobs' or 'idx'");
  if (cfg.data.kind == "blobs") {
    const std::size_t min_per_class = cfg.experiment == "v-scaling" ? 2 : 1;
    require(cfg.data.per_class >= min_per_class, root + ".data.per_class",
            "must be >= " + std::to_string(min_per_class));
  }
  if (cfg.data.kind == "idx") {
    require(!cfg.data.images.empty(), root + ".data.images", "required for idx data");
    require(!cfg.data.labels.empty(), root + ".data.labels", "required for idx data");
  }
  require(std::isfinite(cfg.optim.eta) && cfg.optim.eta >= 0.0, root + ".optim.eta", "must be finite and >= 0");
  require(std::isfinite(cfg.optim.mu) && cfg.optim.mu > 0.0, root + ".optim.mu", "must be > 0");
  require(cfg.optim.steps >= 1, root + ".optim.steps", "must be >= 1");
  require(cfg.pairs >= 1, root + ".pairs", "must be >= 1");
  require(!cfg.P_sweep.empty(), root + ".P_sweep", "must be non-empty");
  for (std::size_t i = 0; i < cfg.P_sweep.size(); ++i)
    require(cfg.P_sweep[i] >= 1, root + ".P_sweep[" + std::to_string(i) + "]", "must be >= 1");
  require(!cfg.distributions.empty(), root + ".distributions", "must be non-empty");
  require(!cfg.seeds.empty(), root + ".seeds", "must be non-empty");
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      require(cfg.seeds[i] != cfg.seeds[k], root + ".seeds[" + std::to_string(i) + "]", "duplicate seed");
  require(!cfg.V_sweep.empty(), root + ".V_sweep", "must be non-empty");
  for (std::size_t i = 0; i < cfg.V_sweep.size(); ++i)
    require(cfg.V_sweep[i] >= 2, root + ".V_sweep[" + std::to_string(i) + "]", "must be >= 2");
  require(cfg.fixed_P >= 1, root + ".P", "must be >= 1");
  require(cfg.probes >= 1, root + ".probes", "must be >= 1");
  const auto& mc = cfg.moment;
  require(mc.fourth_dim >= 1 && mc.fourth_dim <= 64, root + ".moment.fourth_dim", "must be in [1, 64]");
  require(mc.second_dim >= 1, root + ".moment.second_dim", "must be >= 1");
  require(mc.enum_min_dim >= 1 && mc.enum_max_dim <= kMaxEnumerationDim && mc.enum_min_dim <= mc.enum_max_dim,
          root + ".moment.enum_max_dim", "enumeration range must lie in [1, 12]");
  require(mc.concentration_constant > 0.0, root + ".moment.c", "must be > 0");
}

Dataset make_dataset(const ExperimentConfig& cfg, std::size_t num_classes) {
  Dataset ds;
  if (cfg.data.kind == "idx") {
    ds = load_idx_dataset(cfg.data.images, cfg.data.labels);
  } else {
    ds = synth_blobs(num_classes, cfg.model.input_dim, cfg.data.per_class, cfg.data.separation, cfg.seed);
  }
  if (cfg.data.normalize && !ds.inputs.empty()) {
    const std::size_t dim = ds.inputs.front().size();
    const double n = static_cast<double>(ds.size());
    for (std::size_t f = 0; f < dim; ++f) {
      double mean = 0.0, sq = 0.0;
      for (const auto& x : ds.inputs) mean += x[f];
      mean /= n;
      for (const auto& x : ds.inputs) sq += (x[f] - mean) * (x[f] - mean);
      const double sd = std::sqrt(sq / n);
      for (auto& x : ds.inputs) x[f] = sd > 0.0 ? (x[f] - mean) / sd : 0.0;
    }
  }
  ds.validate(cfg.model.input_dim, num_classes);
  return ds;
}

// ---------------------------------------------------------------------------
// kernel-compare

KernelCompareResult run_kernel_compare(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate(cfg);
  prepare_out_dir(cfg, out_dir);
  const MlpConfig& model = cfg.model;
  const std::size_t V = model.output_dim;
  const Dataset data = make_dataset(cfg, V);
  const ParamVector theta = init_params(model);
  const std::size_t d = model.param_count();
  const auto pairs = make_pairs(cfg.pairs, data.size());

  struct PairState {
    JacobianFactors fo, fu;
    KernelMatrix k_fo;
    Matrix gram;
    double xi = 0.0;
    Matrix A;
    Vector G;
  };
  std::vector<PairState> states;
  for (const auto& pr : pairs) {
    PairState st;
    const auto& xo = data.inputs[pr.o];
    const auto& xu = data.inputs[pr.u];
    st.fo = jacobian_factors(theta, model, xo);
    st.fu = jacobian_factors(theta, model, xu);
    st.k_fo = fo_entk(st.fo, st.fu);
    st.k_fo.meta.input_o = "o" + std::to_string(pr.o);
    st.k_fo.meta.input_u = "u" + std::to_string(pr.u);
    st.gram = block_gram(fo_entk(st.fo, st.fo), st.k_fo, fo_entk(st.fu, st.fu));
    st.xi = jacobian_scale(st.fo, st.fu);
    st.A = belief_update_matrix(softmax(forward_logits(theta, model, xo)));
    st.G = grad_loss_logits(forward_logits(theta, model, xu), data.labels[pr.u]);
    states.push_back(std::move(st));
  }

  struct CellKey {
    std::size_t pair, dist, p, seed;
  };
  std::vector<CellKey> keys;
  for (std::size_t pi = 0; pi < pairs.size(); ++pi)
    for (std::size_t di = 0; di < cfg.distributions.size(); ++di)
      for (std::size_t p = 0; p < cfg.P_sweep.size(); ++p)
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) keys.push_back({pi, di, p, s});

  if (cfg.dump_kernels) std::filesystem::create_directories(out_dir / "kernels");

  KernelCompareResult result;
  result.cells.resize(keys.size());
  parallel_for(keys.size(), cfg.threads, [&](std::size_t idx) {
    const CellKey& key = keys[idx];
    const PairState& st = states[key.pair];
    const Distribution dist = cfg.distributions[key.dist];
    const std::size_t P = cfg.P_sweep[key.p];
    const std::uint64_t seed = cfg.seeds[key.seed];

    const PerturbationMatrix U = make_perturbation(seed, 0, d, P, dist);
    const Matrix proj_o = projected_jacobian(U, st.fo);
    const Matrix proj_u = projected_jacobian(U, st.fu);
    KernelMatrix k_zo = zo_entk_from_projected(proj_o, proj_u, U);
    k_zo.meta.input_o = st.k_fo.meta.input_o;
    k_zo.meta.input_u = st.k_fo.meta.input_u;

    KernelCompareCell cell;
    cell.report = compare_kernels(st.k_fo.entries, k_zo.entries);
    cell.report.pair_id = pairs[key.pair].id;
    cell.report.P = P;
    cell.report.distribution = dist;
    cell.report.seed = seed;

    // ε* over all 2V Jacobian columns of both inputs.
    Matrix stacked(P, 2 * V);
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t i = 0; i < V; ++i) {
        stacked(p, i) = proj_o(p, i);
        stacked(p, V + i) = proj_u(p, i);
      }
    cell.epsilon_star = epsilon_star(st.gram, transpose_matmul(stacked, stacked));
    cell.xi = st.xi;
    const Matrix dk = kernel_discrepancy(st.k_fo, k_zo);
    cell.delta_k_norm = frobenius_norm(dk);
    cell.delta_k_bound = delta_k_bound(cell.epsilon_star, cell.xi, V);
    DynamicsDecomposition diff{st.A, dk, st.G, cfg.optim.eta};
    cell.predicted_diff_norm = norm2(predict_dynamics(diff));
    if (cfg.optim.eta > 0.0 && norm2(st.G) > 0.0) {
      cell.diff_bound = dynamics_diff_bound(V, P, cfg.optim.eta, st.xi, norm2(st.G), spectral_norm(st.A),
                                            kConcentrationConstant, 0.01);
    }
    if (cfg.dump_kernels) {
      const std::string name = "p" + std::to_string(key.pair) + "_" + dist_name(dist) + "_P" + std::to_string(P) +
                               "_s" + std::to_string(seed) + ".json";
      write_text_file(out_dir / "kernels" / name, kernel_to_json(k_zo).dump() + "\n");
    }
    result.cells[idx] = std::move(cell);
  });

  if (cfg.dump_kernels) {
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
      write_text_file(out_dir / "kernels" / ("p" + std::to_string(pi) + "_fo.json"),
                      kernel_to_json(states[pi].k_fo).dump() + "\n");
    }
  }

  // Cells are already in (pair, distribution, P, seed) order; medians per (pair, distribution, P).
  const std::size_t S = cfg.seeds.size();
  for (std::size_t base = 0; base < result.cells.size(); base += S) {
    std::vector<double> fr, ck, sp;
    for (std::size_t s = 0; s < S; ++s) {
      const auto& r = result.cells[base + s].report;
      fr.push_back(r.rel_frobenius);
      ck.push_back(r.cka_error);
      sp.push_back(r.spectral_distance);
    }
    const auto& r0 = result.cells[base].report;
    result.medians.push_back({r0.pair_id, r0.distribution, r0.P, median(fr), median(ck), median(sp)});
  }

  const std::size_t NP = cfg.P_sweep.size();
  if (NP >= 2) {
    for (std::size_t base = 0; base < result.medians.size(); base += NP) {
      std::vector<double> xs, fr, ck, sp;
      for (std::size_t p = 0; p < NP; ++p) {
        const auto& m = result.medians[base + p];
        xs.push_back(static_cast<double>(m.P));
        fr.push_back(m.rel_frobenius);
        ck.push_back(m.cka_error);
        sp.push_back(m.spectral_distance);
      }
      const auto& m0 = result.medians[base];
      const std::string prefix = m0.pair_id + "/" + dist_name(m0.distribution) + "/";
      auto slope_or_nan = [&](const std::vector<double>& ys) {
        for (double y : ys)
          if (!(y > 0.0)) return std::nan("");
        return loglog_slope(xs, ys);
      };
      result.slopes[prefix + "rel_frobenius"] = slope_or_nan(fr);
      result.slopes[prefix + "cka_error"] = slope_or_nan(ck);
      result.slopes[prefix + "spectral_distance"] = slope_or_nan(sp);
    }
  }
  result.a_norm = spectral_norm(states.front().A);

  {
    std::ofstream out(out_dir / "kernel_compare.csv", std::ios::binary);
    CsvWriter csv(out, {"pair_id", "P", "distribution", "seed", "rel_frobenius", "cka_error", "spectral_distance",
                        "spectra_kind"});
    for (const auto& c : result.cells) {
      const auto& r = c.report;
      csv.cell(r.pair_id).cell(std::uint64_t{r.P}).cell(to_string(r.distribution)).cell(std::uint64_t{r.seed});
      csv.cell(r.rel_frobenius).cell(r.cka_error).cell(r.spectral_distance).cell(to_string(r.spectra_kind));
      csv.end_row();
    }
    for (const auto& m : result.medians) {
      csv.cell(m.pair_id).cell(std::uint64_t{m.P}).cell(to_string(m.distribution)).cell("median");
      csv.cell(m.rel_frobenius).cell(m.cka_error).cell(m.spectral_distance).cell("-");
      csv.end_row();
    }
  }

  json bounds = json::array();
  for (const auto& c : result.cells) {
    bounds.push_back({{"pair_id", c.report.pair_id},
                      {"P", c.report.P},
                      {"distribution", dist_name(c.report.distribution)},
                      {"seed", c.report.seed},
                      {"epsilon_star", c.epsilon_star},
                      {"xi", c.xi},
                      {"delta_k_norm", c.delta_k_norm},
                      {"delta_k_bound", c.delta_k_bound},
                      {"delta_k_bound_holds", c.delta_k_norm <= c.delta_k_bound},
                      {"predicted_diff_norm", c.predicted_diff_norm},
                      {"diff_bound_simplified", c.diff_bound.simplified},
                      {"diff_bound_explicit", c.diff_bound.explicit_form}});
  }
  json summary{{"V", V},
               {"d", d},
               {"a_spectral_norm", result.a_norm},
               {"small_v_warning", V < 3},
               {"slopes", result.slopes}};
  write_text_file(out_dir / "bounds.json", bounds.dump(2) + "\n");
  write_text_file(out_dir / "kernel_compare_summary.json", summary.dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------------------
// trajectory

TrajectoryResult run_trajectory_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate(cfg);
  prepare_out_dir(cfg, out_dir);
  const MlpConfig& model = cfg.model;
  const Dataset data = make_dataset(cfg, model.output_dim);
  const ParamVector theta0 = init_params(model);

  std::vector<Vector> probes;
  for (std::size_t k = 0; k < cfg.probes; ++k) probes.push_back(data.inputs[(k * data.size()) / cfg.probes]);

  auto optim_for = [&](std::size_t P, Distribution dist, std::uint64_t seed) {
    OptimConfig o = cfg.optim;
    o.P = P;
    o.distribution = dist;
    o.master_seed = seed;
    return o;
  };

  TrajectoryResult result;
  result.baselines.resize(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t s) {
    TrajectoryRun run;
    run.algorithm = Algorithm::FO;
    run.seed = cfg.seeds[s];
    run.record = run_trajectory(model, theta0, data, optim_for(1, Distribution::Gaussian, run.seed), Algorithm::FO,
                                probes);
    result.baselines[s] = std::move(run);
  });

  struct RunKey {
    std::size_t dist, p, seed;
  };
  std::vector<RunKey> keys;
  for (std::size_t di = 0; di < cfg.distributions.size(); ++di)
    for (std::size_t p = 0; p < cfg.P_sweep.size(); ++p)
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) keys.push_back({di, p, s});

  result.runs.resize(keys.size());
  parallel_for(keys.size(), cfg.threads, [&](std::size_t idx) {
    const auto& key = keys[idx];
    TrajectoryRun run;
    run.algorithm = cfg.fo_control ? Algorithm::FO : Algorithm::ZO;
    run.P = cfg.P_sweep[key.p];
    run.distribution = cfg.distributions[key.dist];
    run.seed = cfg.seeds[key.seed];
    run.record = run_trajectory(model, theta0, data, optim_for(run.P, run.distribution, run.seed), run.algorithm,
                                probes);
    const auto& base = result.baselines[key.seed].record;
    const std::size_t common = std::min(base.steps.size(), run.record.steps.size());
    for (std::size_t t = 0; t < common; ++t) {
      std::vector<double> row;
      for (std::size_t k = 0; k < probes.size(); ++k) {
        const auto& a = run.record.steps[t].probe_beliefs[k];
        const auto& b = base.steps[t].probe_beliefs[k];
        double sq = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c) sq += (a[c] - b[c]) * (a[c] - b[c]);
        row.push_back(std::sqrt(sq));
      }
      run.gaps.push_back(std::move(row));
    }
    if (!run.gaps.empty()) {
      const auto& last = run.gaps.back();
      run.final_gap = std::accumulate(last.begin(), last.end(), 0.0) / static_cast<double>(last.size());
    } else {
      run.final_gap = std::nan("");
    }
    result.runs[idx] = std::move(run);
  });

  const std::size_t S = cfg.seeds.size();
  for (std::size_t base = 0; base < result.runs.size(); base += S) {
    std::vector<double> gaps;
    for (std::size_t s = 0; s < S; ++s) gaps.push_back(result.runs[base + s].final_gap);
    const auto& r0 = result.runs[base];
    result.median_final_gap[dist_name(r0.distribution) + "/" + std::to_string(r0.P)] = median(gaps);
  }

  {
    std::ofstream out(out_dir / "trajectory.csv", std::ios::binary);
    CsvWriter csv(out, {"step", "algorithm", "P", "distribution", "seed", "loss", "probe_id", "class", "logit",
                        "belief", "belief_l2_gap"});
    auto emit = [&](const TrajectoryRun& run, bool baseline) {
      const std::string algo = baseline ? "FO" : (cfg.fo_control ? "FO-control" : "ZO");
      const std::string dist = baseline ? "none" : dist_name(run.distribution);
      for (std::size_t t = 0; t < run.record.steps.size(); ++t) {
        const auto& st = run.record.steps[t];
        for (std::size_t k = 0; k < st.probe_beliefs.size(); ++k) {
          const double gap = baseline ? 0.0 : (t < run.gaps.size() ? run.gaps[t][k] : std::nan(""));
          for (std::size_t c = 0; c < st.probe_beliefs[k].size(); ++c) {
            csv.cell(std::uint64_t{st.step}).cell(algo).cell(std::uint64_t{run.P}).cell(dist);
            csv.cell(std::uint64_t{run.seed}).cell(st.loss).cell(std::uint64_t{k}).cell(std::uint64_t{c});
            csv.cell(st.probe_logits[k][c]).cell(st.probe_beliefs[k][c]).cell(gap);
            csv.end_row();
          }
        }
      }
    };
    for (const auto& b : result.baselines) emit(b, true);
    for (const auto& r : result.runs) emit(r, false);
  }

  json runs = json::array();
  for (const auto& b : result.baselines) {
    runs.push_back({{"algorithm", "FO"},
                    {"seed", b.seed},
                    {"steps_completed", b.record.steps.size()},
                    {"diverged", b.record.diverged}});
  }
  for (const auto& r : result.runs) {
    runs.push_back({{"algorithm", cfg.fo_control ? "FO-control" : "ZO"},
                    {"P", r.P},
                    {"distribution", dist_name(r.distribution)},
                    {"seed", r.seed},
                    {"steps_completed", r.record.steps.size()},
                    {"diverged", r.record.diverged},
                    {"final_gap", r.final_gap}});
  }
  write_text_file(out_dir / "trajectory_summary.json",
                  json{{"runs", runs}, {"median_final_gap", result.median_final_gap}}.dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------------------
// v-scaling

VScalingResult run_v_scaling(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate(cfg);
  prepare_out_dir(cfg, out_dir);
  VScalingResult result;

  struct VState {
    MlpConfig model;
    JacobianFactors fo, fu;
    KernelMatrix k_fo;
  };
  // One input pair shared by every V so that only the output layer changes across the sweep.
  // Labels are not used here; 256 admits any IDX label byte.
  const Dataset pair_data = make_dataset(cfg, cfg.data.kind == "blobs" ? 2 : 256);
  if (pair_data.size() < 2) throw InvalidArgument("config.data: v-scaling needs at least two inputs");
  // Two distinct points of the same class (class-major order for blobs).
  const std::size_t u_index = 1;
  const Vector& x_o = pair_data.inputs[0];
  const Vector& x_u = pair_data.inputs[u_index];

  std::vector<VState> states;
  for (std::size_t V : cfg.V_sweep) {
    VState st;
    st.model = cfg.model;
    st.model.output_dim = V;
    const ParamVector theta = init_params(st.model);
    st.fo = jacobian_factors(theta, st.model, x_o);
    st.fu = jacobian_factors(theta, st.model, x_u);
    st.k_fo = fo_entk(st.fo, st.fu);
    states.push_back(std::move(st));
  }

  struct Key {
    std::size_t v, dist, seed;
  };
  std::vector<Key> keys;
  for (std::size_t di = 0; di < cfg.distributions.size(); ++di)
    for (std::size_t v = 0; v < cfg.V_sweep.size(); ++v)
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) keys.push_back({v, di, s});

  result.rows.resize(keys.size());
  parallel_for(keys.size(), cfg.threads, [&](std::size_t idx) {
    const auto& key = keys[idx];
    const auto& st = states[key.v];
    VScalingRow row;
    row.V = cfg.V_sweep[key.v];
    row.P = cfg.fixed_P;
    row.distribution = cfg.distributions[key.dist];
    row.seed = cfg.seeds[key.seed];
    const PerturbationMatrix U = make_perturbation(row.seed, 0, st.model.param_count(), row.P, row.distribution);
    const KernelMatrix k_zo = zo_entk(st.fo, st.fu, U);
    row.diff_norm = frobenius_norm(kernel_discrepancy(st.k_fo, k_zo));
    row.fo_norm = frobenius_norm(st.k_fo.entries);
    row.rel_error = row.diff_norm / row.fo_norm;
    result.rows[idx] = row;
  });

  const std::size_t S = cfg.seeds.size();
  for (std::size_t base = 0; base < result.rows.size(); base += S) {
    std::vector<double> k, f, r;
    for (std::size_t s = 0; s < S; ++s) {
      k.push_back(result.rows[base + s].diff_norm);
      f.push_back(result.rows[base + s].fo_norm);
      r.push_back(result.rows[base + s].rel_error);
    }
    VScalingRow m = result.rows[base];
    m.diff_norm = median(k);
    m.fo_norm = median(f);
    m.rel_error = median(r);
    result.medians.push_back(m);
  }

  // Growth relative to the first swept V, measured against √(V ln V).
  json summary = json::object();
  const std::size_t NV = cfg.V_sweep.size();
  for (std::size_t base = 0; base < result.medians.size(); base += NV) {
    json per_v = json::array();
    bool increasing = true;
    const auto& first = result.medians[base];
    const double law0 = std::sqrt(first.V * std::log(static_cast<double>(first.V)));
    for (std::size_t v = 0; v < NV; ++v) {
      const auto& m = result.medians[base + v];
      if (v > 0 && !(m.rel_error > result.medians[base + v - 1].rel_error)) increasing = false;
      per_v.push_back({{"V", m.V},
                       {"rel_error", m.rel_error},
                       {"ratio_to_first", m.rel_error / first.rel_error},
                       {"predicted_ratio_to_first", std::sqrt(m.V * std::log(static_cast<double>(m.V))) / law0}});
    }
    summary[dist_name(first.distribution)] = {{"strictly_increasing", increasing}, {"medians", per_v}};
  }
  write_text_file(out_dir / "v_scaling_summary.json", summary.dump(2) + "\n");

  std::ofstream out(out_dir / "v_scaling.csv", std::ios::binary);
  CsvWriter csv(out, {"V", "P", "distribution", "seed", "diff_norm", "fo_norm", "rel_error"});
  for (const auto& r : result.rows) {
    csv.cell(std::uint64_t{r.V}).cell(std::uint64_t{r.P}).cell(to_string(r.distribution)).cell(std::uint64_t{r.seed});
    csv.cell(r.diff_norm).cell(r.fo_norm).cell(r.rel_error);
    csv.end_row();
  }
  for (const auto& r : result.medians) {
    csv.cell(std::uint64_t{r.V}).cell(std::uint64_t{r.P}).cell(to_string(r.distribution)).cell("median");
    csv.cell(r.diff_norm).cell(r.fo_norm).cell(r.rel_error);
    csv.end_row();
  }
  return result;
}

// ---------------------------------------------------------------------------
// moment-check

json run_moment_check(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate(cfg);
  prepare_out_dir(cfg, out_dir);
  const auto& mc = cfg.moment;
  json checks = json::array();
  bool all_passed = true;

  auto record = [&](const std::string& name, double measured, double target, double error, double tol,
                    json extra = json::object()) {
    const bool passed = error <= tol;
    all_passed = all_passed && passed;
    json c{{"name", name}, {"measured", measured}, {"target", target}, {"error", error}, {"tolerance", tol},
           {"passed", passed}};
    c.update(extra);
    checks.push_back(std::move(c));
  };
  // Relative Frobenius error, or absolute when the target vanishes.
  auto matrix_error = [](const Matrix& got, const Matrix& want) {
    const double ref = frobenius_norm(want);
    const double diff = frobenius_norm(got - want);
    return ref > 0.0 ? diff / ref : diff;
  };

  // Random symmetric W.
  Matrix W(mc.fourth_dim, mc.fourth_dim);
  if (!mc.zero_inputs) {
    Stream s(StreamKey{cfg.seed, 0, 0, Purpose::Points});
    for (std::size_t i = 0; i < W.rows(); ++i)
      for (std::size_t j = 0; j <= i; ++j) W(i, j) = W(j, i) = s.normal();
  }

  {
    const Matrix target = gaussian_fourth_moment_target(W);
    const Matrix got = gaussian_fourth_moment_oracle(W, mc.fourth_samples, cfg.seed);
    record("gaussian_fourth_moment", frobenius_norm(got), frobenius_norm(target), matrix_error(got, target),
           mc.fourth_tol, {{"d", mc.fourth_dim}, {"samples", mc.fourth_samples}});
  }
  for (std::size_t P : mc.multi_P) {
    const Matrix target = multi_perturbation_target(W, P);
    const Matrix got = multi_perturbation_expectation_oracle(W, P, mc.multi_samples, cfg.seed);
    record("multi_perturbation_expectation", frobenius_norm(got), frobenius_norm(target), matrix_error(got, target),
           mc.multi_tol, {{"P", P}, {"samples", mc.multi_samples}});
  }
  for (std::size_t d = mc.enum_min_dim; d <= mc.enum_max_dim; ++d) {
    Vector g(d, 0.0);
    if (!mc.zero_inputs) Stream(StreamKey{cfg.seed, d, 1, Purpose::Points}).fill(g, Distribution::Gaussian);
    const double got = rademacher_second_moment_exact(g);
    const double target = static_cast<double>(d) * dot(g, g);
    const double err = target > 0.0 ? std::abs(got - target) / target : std::abs(got);
    record("rademacher_second_moment_exact", got, target, err, mc.enum_tol, {{"d", d}});
  }
  {
    Vector g(mc.second_dim, 0.0);
    if (!mc.zero_inputs) Stream(StreamKey{cfg.seed, 0, 2, Purpose::Points}).fill(g, Distribution::Gaussian);
    const double target = static_cast<double>(mc.second_dim + 2) * dot(g, g);
    const double got = second_moment_sampled(g, Distribution::Gaussian, mc.second_samples, cfg.seed);
    const double err = target > 0.0 ? std::abs(got - target) / target : std::abs(got);
    record("gaussian_second_moment", got, target, err, mc.second_tol,
           {{"d", mc.second_dim}, {"samples", mc.second_samples}});
  }
  // Concentration: observed tail must stay under slack × the c-parameterised bound.
  for (Distribution dist : {Distribution::Gaussian, Distribution::Rademacher}) {
    for (std::size_t P : mc.tail_P) {
      const double observed =
          projection_tail_frequency(mc.tail_dim, P, mc.tail_epsilon, dist, mc.tail_trials, cfg.seed);
      const double bound = mc.tail_slack * gaussian_tail_bound(P, mc.tail_epsilon, mc.concentration_constant);
      json extra{{"P", P}, {"distribution", dist_name(dist)}, {"c", mc.concentration_constant}};
      if (dist == Distribution::Rademacher) {
        extra["achlioptas_bound"] = rademacher_tail_bound(P, mc.tail_epsilon);
      }
      // error/tolerance expressed as observed vs allowed frequency.
      record("projection_concentration", observed, bound, observed, bound, extra);
    }
  }

  json report{{"passed", all_passed}, {"checks", checks}};
  write_text_file(out_dir / "moment_check.json", report.dump(2) + "\n");
  return report;
}

json run_jl_budget(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const JlBudget b = jl_budget(cfg.jl_n, cfg.jl_epsilon, cfg.jl_delta, cfg.jl_c);
  json report{{"n", b.n},
              {"epsilon", b.epsilon},
              {"delta", b.delta},
              {"c", b.concentration_constant},
              {"required_P", b.required_P},
              {"epsilon_at_required_P", jl_epsilon(b.n, b.required_P, b.concentration_constant, b.delta)}};
  if (!out_dir.empty()) {
    prepare_out_dir(cfg, out_dir);
    write_text_file(out_dir / "jl_budget.json", report.dump(2) + "\n");
  }
  return report;
}

}  // namespace zkl
