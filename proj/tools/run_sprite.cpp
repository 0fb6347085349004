// Command-line front end: super-resolved PSF reconstruction from a stack of
// undersampled exposures, a synthetic-data generator, and a benchmark grid.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sprite/errors.hpp"
#include "sprite/io.hpp"
#include "sprite/simulation.hpp"
#include "sprite/solvers.hpp"

namespace fs = std::filesystem;
using namespace sprite;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitEstimation = 3;
constexpr int kExitSolver = 4;
constexpr int kExitBenchmarkDegraded = 5;

Dictionary dictionary_from_code(int code) {
  if (code == 2) return Dictionary::starlet2;
  if (code == 24) return Dictionary::bior79;
  throw input_error("transform code must be 2 (starlet2) or 24 (bior79)");
}

// Optional key = value file with the advanced solver knobs.
void load_solver_config(const std::string& path, SolverConfig& cfg) {
  for (const auto& [key, value] : read_key_values(path)) {
    try {
      if (key == "kappa") cfg.kappa = std::stod(value);
      else if (key == "levels") cfg.levels = std::stoi(value);
      else if (key == "omega1") cfg.omega1 = std::stod(value);
      else if (key == "omega2") cfg.omega2 = std::stod(value);
      else if (key == "mu") cfg.mu = std::stod(value);
      else if (key == "relax") cfg.relax = std::stod(value);
      else if (key == "max_iters") cfg.max_iters = std::stoi(value);
      else if (key == "rel_tol") cfg.rel_tol = std::stod(value);
      else if (key == "reweight_passes") cfg.reweight_passes = std::stoi(value);
      else if (key == "positivity") cfg.positivity = std::stoi(value) != 0;
      else if (key == "lambda_mode")
        cfg.lambda_mode = value == "monte-carlo" ? LambdaCalibration::monte_carlo
                                                 : LambdaCalibration::residual_mad;
      else if (key == "lambda_refresh_each_iter")
        cfg.lambda_refresh_each_iter = std::stoi(value) != 0;
      else if (key == "mc_realizations") cfg.mc_realizations = std::stoi(value);
      else if (key == "prox_max_iters") cfg.prox.inner_max_iters = std::stoi(value);
      else if (key == "prox_rel_tol") cfg.prox.inner_rel_tol = std::stod(value);
      else if (key == "prox_mu") cfg.prox.mu_prox = std::stod(value);
      else if (key == "prox_warm_start") cfg.prox.warm_start = std::stoi(value) != 0;
      else if (key == "conv_path")
        cfg.conv_path = value == "direct" ? ConvPath::direct
                        : value == "fft" ? ConvPath::fft
                                         : ConvPath::automatic;
      else
        throw input_error("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw input_error("bad value for config key " + key + ": " + value);
    }
  }
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw input_error("empty list: " + csv);
  return out;
}

std::string csv_escape(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c == ',' || c == '\n') c = ';';
  return out;
}

int do_reconstruct(const std::string& data_file, const std::string& output_file,
                   const std::string& output_dir, int transform_code, double kappa,
                   int upsampling, bool estimate_flux_flag, bool estimate_noise_flag,
                   double user_sigma, const std::string& config_path,
                   std::uint64_t seed) {
  SolverConfig cfg;
  cfg.dict = dictionary_from_code(transform_code);
  cfg.kappa = kappa;
  cfg.seed = seed;
  if (!config_path.empty()) load_solver_config(config_path, cfg);
  if (upsampling < 1) throw input_error("upsampling must be >= 1");
  if (kappa <= 0) throw input_error("kappa must be positive");

  const CubeFile cube = read_stack_file(data_file);
  LRStack stack;
  stack.upsampling = upsampling;
  for (const auto& plane : cube.planes) {
    LRExposure e;
    e.image = plane;
    e.sigma = user_sigma;
    stack.exposures.push_back(std::move(e));
  }

  EstimationOptions opts;
  opts.estimate_noise = estimate_noise_flag;
  opts.estimate_flux = estimate_flux_flag;
  opts.default_sigma = user_sigma;
  EstimationReport rep = estimate_stack(stack, opts);
  // header keywords, when present, take precedence over estimates
  if (!cube.sigmas.empty()) {
    if (cube.sigmas.size() != std::size_t(stack.count()))
      throw input_error("SIGMA keywords do not match the exposure count");
    rep.sigmas = cube.sigmas;
    rep.sigma_degenerate = false;
  }
  if (!cube.fluxes.empty()) {
    if (cube.fluxes.size() != std::size_t(stack.count()))
      throw input_error("FLUX keywords do not match the exposure count");
    rep.fluxes = cube.fluxes;
  }

  const SpriteResult result =
      sprite_reconstruct(apply_report(stack, rep), cfg, opts, true);

  write_fits_image(output_file, result.solution);
  write_report((fs::path(output_dir) / "report.txt").string(), result.estimation,
               result.diag);
  return kExitOk;
}

int do_simulate(const std::string& out_dir, const std::string& psf_kind,
                double snr_db, int n, int d, int lr_size, double sigma_x,
                double sigma_y, double theta, double first_null,
                double obscuration, std::uint64_t seed) {
  SimSpec spec;
  spec.kind = psf_kind == "airy" ? PsfKind::obscured_airy
                                 : PsfKind::elliptical_gaussian;
  if (psf_kind != "airy" && psf_kind != "gaussian")
    throw input_error("psf kind must be gaussian or airy");
  spec.params.sigma_x = sigma_x;
  spec.params.sigma_y = sigma_y;
  spec.params.theta = theta;
  spec.params.airy_first_null = first_null;
  spec.params.obscuration = obscuration;
  spec.n_exposures = n;
  spec.d = d;
  spec.snr_db = snr_db;
  spec.seed = seed;

  const Image truth =
      make_psf(spec.kind, spec.params, lr_size * d, lr_size * d);
  const SyntheticStack synth = synthesize_stack(truth, spec);

  fs::create_directories(out_dir);
  write_fits_image((fs::path(out_dir) / "truth.fits").string(), synth.truth);
  std::vector<Image> planes;
  for (const auto& e : synth.stack.exposures) planes.push_back(e.image);
  write_fits_cube((fs::path(out_dir) / "stack.fits").string(), planes);

  std::vector<std::pair<std::string, std::string>> side;
  auto num = [](double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
  };
  side.emplace_back("psf", psf_kind);
  side.emplace_back("seed", std::to_string(seed));
  side.emplace_back("snr_db", num(snr_db));
  side.emplace_back("upsampling", std::to_string(d));
  side.emplace_back("exposures", std::to_string(n));
  side.emplace_back("signal_level", num(synth.signal_level));
  side.emplace_back("noise_sigma", num(synth.noise_sigma));
  for (int k = 0; k < n; ++k) {
    side.emplace_back("shift_" + std::to_string(k),
                      num(synth.shifts[k][0]) + " " + num(synth.shifts[k][1]));
    side.emplace_back("flux_" + std::to_string(k), num(synth.fluxes[k]));
  }
  write_sidecar((fs::path(out_dir) / "truth.txt").string(), side);
  return kExitOk;
}

int do_benchmark(const std::string& out_dir, const std::string& snrs_csv,
                 int trials, const std::string& methods_csv, int lr_size, int d,
                 const std::string& psf_kind, double reg_lambda,
                 const std::string& config_path, std::uint64_t seed, int jobs) {
  BenchmarkSpec spec;
  spec.snrs_db = parse_double_list(snrs_csv);
  spec.trials = trials;
  spec.methods.clear();
  {
    std::stringstream ss(methods_csv);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) spec.methods.push_back(method_from_name(item));
  }
  if (spec.methods.empty()) throw input_error("no methods selected");
  spec.lr_size = lr_size;
  spec.d = d;
  spec.kind = psf_kind == "airy" ? PsfKind::obscured_airy
                                 : PsfKind::elliptical_gaussian;
  spec.quad_reg_lambda = reg_lambda;
  spec.seed = seed;
  spec.jobs = jobs;
  if (!config_path.empty()) load_solver_config(config_path, spec.solver);

  const BenchmarkResult result = run_benchmark(spec);

  fs::create_directories(out_dir);
  std::ostringstream details, failures, aggregate;
  details << "snr_db,method,trial,e1_err,e2_err,fwhm_err_pct,errmap_std,pearson,"
             "runtime_s\n";
  failures << "snr_db,method,trial,error\n";
  details.precision(12);
  for (const auto& row : result.rows) {
    if (row.ok) {
      details << row.snr_db << "," << method_name(row.method) << "," << row.trial
              << "," << row.e1_err << "," << row.e2_err << "," << row.fwhm_err_pct
              << "," << row.errmap_std << "," << row.pearson << ","
              << row.runtime_s << "\n";
    } else {
      failures << row.snr_db << "," << method_name(row.method) << "," << row.trial
               << "," << csv_escape(row.error) << "\n";
    }
  }
  aggregate << "snr_db,method,count,e1_err_mean,e1_err_std,e2_err_mean,e2_err_std,"
               "fwhm_err_pct_mean,fwhm_err_pct_std,errmap_std_mean,errmap_std_std,"
               "pearson_mean,pearson_std,runtime_s_mean\n";
  aggregate.precision(12);
  for (const auto& a : result.aggregates) {
    aggregate << a.snr_db << "," << method_name(a.method) << "," << a.count << ","
              << a.e1_err_mean << "," << a.e1_err_std << "," << a.e2_err_mean << ","
              << a.e2_err_std << "," << a.fwhm_err_pct_mean << ","
              << a.fwhm_err_pct_std << "," << a.errmap_std_mean << ","
              << a.errmap_std_std << "," << a.pearson_mean << "," << a.pearson_std
              << "," << a.runtime_s_mean << "\n";
  }
  atomic_write_bytes((fs::path(out_dir) / "details.csv").string(), details.str());
  atomic_write_bytes((fs::path(out_dir) / "aggregate.csv").string(),
                     aggregate.str());
  atomic_write_bytes((fs::path(out_dir) / "failures.csv").string(), failures.str());

  const double ok_frac =
      result.cells == 0
          ? 0.0
          : double(result.cells - result.failures) / double(result.cells);
  return ok_frac >= 0.90 ? kExitOk : kExitBenchmarkDegraded;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"super-resolved PSF recovery from undersampled exposures"};
  app.require_subcommand(1);

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "solve for the super-resolved PSF");
  int transform_code = 2;
  double kappa = 4.0;
  int upsampling = 2;
  bool flag_flux = false, flag_noise = false;
  double user_sigma = 1.0;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string data_file, output_file, output_dir;
  rec->add_option("-t", transform_code, "transform: 2 = starlet2, 24 = bior79");
  rec->add_option("-s", kappa, "sparsity constraint parameter");
  rec->add_option("-r", upsampling, "upsampling factor");
  rec->add_flag("-F", flag_flux, "estimate per-exposure photometric flux");
  rec->add_flag("-N", flag_noise, "estimate per-exposure noise levels");
  rec->add_option("--sigma", user_sigma, "noise level used when -N is absent");
  rec->add_option("--config", config_path, "advanced solver parameter file");
  rec->add_option("--seed", seed, "seed for any Monte-Carlo calibration");
  rec->add_option("data_file", data_file, "input LR stack (FITS cube or raw)")
      ->required();
  rec->add_option("output_file", output_file, "output FITS image")->required();
  rec->add_option("output_directory", output_dir, "directory for the text report")
      ->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic LR stack");
  std::string psf_kind = "gaussian";
  double snr_db = 30.0, sigma_x = 2.0, sigma_y = 2.0, theta = 0.0;
  double first_null = 4.0, obscuration = 0.3;
  int n_exposures = 4, sim_d = 2, lr_size = 84;
  std::uint64_t sim_seed = 0;
  std::string sim_dir;
  sim->add_option("--psf", psf_kind, "gaussian or airy");
  sim->add_option("--snr", snr_db, "SNR in dB");
  sim->add_option("--n", n_exposures, "number of exposures");
  sim->add_option("-r,--upsampling", sim_d, "upsampling factor");
  sim->add_option("--size", lr_size, "LR exposure side in pixels");
  sim->add_option("--sigma-x", sigma_x, "gaussian width along x, HR pixels");
  sim->add_option("--sigma-y", sigma_y, "gaussian width along y, HR pixels");
  sim->add_option("--theta", theta, "gaussian position angle, radians");
  sim->add_option("--first-null", first_null, "airy first-null radius, HR pixels");
  sim->add_option("--obscuration", obscuration, "central obscuration fraction");
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("output_directory", sim_dir, "where to write the outputs")
      ->required();

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "score methods over an SNR grid");
  std::string snrs_csv = "10,15,20,25,30";
  int trials = 20;
  std::string methods_csv = "shift-and-add,quadratic-baseline,sprite-starlet2";
  int bench_size = 84, bench_d = 2, jobs = 1;
  std::string bench_psf = "gaussian", bench_config;
  double reg_lambda = 1.0;
  std::uint64_t bench_seed = 0;
  std::string bench_dir;
  bench->add_option("--snrs", snrs_csv, "comma-separated SNR list in dB");
  bench->add_option("--trials", trials, "trials per (snr, method) cell");
  bench->add_option("--methods", methods_csv, "comma-separated method names");
  bench->add_option("--size", bench_size, "LR exposure side in pixels");
  bench->add_option("-r,--upsampling", bench_d, "upsampling factor");
  bench->add_option("--psf", bench_psf, "gaussian or airy");
  bench->add_option("--reg-lambda", reg_lambda, "quadratic baseline weight");
  bench->add_option("--config", bench_config, "advanced solver parameter file");
  bench->add_option("--seed", bench_seed, "random seed");
  bench->add_option("--jobs", jobs, "worker threads");
  bench->add_option("output_directory", bench_dir, "where to write the CSVs")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (rec->parsed())
      return do_reconstruct(data_file, output_file, output_dir, transform_code,
                            kappa, upsampling, flag_flux, flag_noise, user_sigma,
                            config_path, seed);
    if (sim->parsed())
      return do_simulate(sim_dir, psf_kind, snr_db, n_exposures, sim_d, lr_size,
                         sigma_x, sigma_y, theta, first_null, obscuration,
                         sim_seed);
    if (bench->parsed())
      return do_benchmark(bench_dir, snrs_csv, trials, methods_csv, bench_size,
                          bench_d, bench_psf, reg_lambda, bench_config,
                          bench_seed, jobs);
  } catch (const input_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const estimation_error& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const solver_error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
