// fcollide: Floquet collision analysis from the command line.
//
//   fcollide analyze  --device cr2.json --order 2 --threshold 0.1
//   fcollide sweep    --device cr2.json --axis1 detuning.c.t,-1e9,1e9,401 --order 2 --csv out.csv
//   fcollide census   --device hhex_d3.json --table-iv
//   fcollide fidelity --device cr2.json --pair 'g+;0' 'e+;-1' --gate-time 2e-7
//
// Exit codes: 0 success (analyze: nothing above threshold), 2 collisions found, 1 error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <fcollide/cli.hpp>

namespace {

using namespace fcollide;

struct Common {
  std::string device;
  std::string schedule;
  int order = 1;
  double threshold = 0.1;
  std::optional<int> levels;
  double deg_tol_hz = ordinary(perturbation::kDefaultDegTol);
  unsigned jobs = 0;
  std::string output;
  std::string csv;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--device", c.device, "device or lattice JSON file")->required();
  app->add_option("--schedule", c.schedule, "named CR schedule (default: the device's own drives)");
  app->add_option("--order", c.order, "perturbation order k")->check(CLI::PositiveNumber);
  app->add_option("--threshold", c.threshold, "collision angle threshold (rad)");
  app->add_option("--levels", c.levels, "transmon levels per qubit")->check(CLI::Range(2, 12));
  app->add_option("--deg-tol", c.deg_tol_hz, "degeneracy tolerance (Hz)")->check(CLI::PositiveNumber);
  app->add_option("--jobs", c.jobs, "worker threads (0: all cores)");
  app->add_option("--output", c.output, "structured report path (default: stdout)");
}

device_model::DeviceSpec load(const Common& c) { return device_model::load_device(c.device, c.levels); }

device_model::LatticeSchedule pick_schedule(const device_model::DeviceSpec& dev, const std::string& name) {
  if (!name.empty()) return dev.schedule(name);
  if (!dev.drives.empty()) return device_model::schedule_from_drives(dev);
  if (dev.schedules.size() == 1) return dev.schedules.front();
  throw DomainError("device has no drives; pass --schedule");
}

cli::PointOptions point_options(const Common& c) {
  cli::PointOptions o;
  o.threshold = c.threshold;
  o.deg_tol = angular(c.deg_tol_hz);
  o.jobs = c.jobs;
  return o;
}

void emit(const std::string& path, const nlohmann::json& j) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

cli::SweepAxis parse_axis(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() != 4) throw DomainError("axis '" + text + "': expected path,start,stop,count");
  cli::SweepAxis a;
  a.path = parts[0];
  try {
    a.start = std::stod(parts[1]);
    a.stop = std::stod(parts[2]);
    a.count = std::stoi(parts[3]);
  } catch (const std::exception&) {
    throw DomainError("axis '" + text + "': bad number");
  }
  return a;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floquet collision analysis"};
  app.require_subcommand(1);

  Common an, sw, ce, fi;
  auto* analyze = app.add_subcommand("analyze", "collision search on one device");
  add_common(analyze, an);

  auto* sweep = app.add_subcommand("sweep", "1D/2D parameter sweep to CSV");
  add_common(sweep, sw);
  std::string axis1, axis2;
  sweep->add_option("--axis1", axis1, "path,start,stop,count")->required();
  sweep->add_option("--axis2", axis2, "path,start,stop,count");
  sweep->add_option("--csv", sw.csv, "CSV output path (default: stdout)");

  auto* census = app.add_subcommand("census", "potential collision census around a center");
  add_common(census, ce);
  std::string center;
  bool table_iv = false;
  int max_order = 2;
  census->add_option("--center", center, "center qubit id or named sublattice");
  census->add_option("--max-order", max_order, "largest walk length")->check(CLI::NonNegativeNumber);
  census->add_flag("--table-iv", table_iv, "every named center against every schedule");

  auto* fidelity = app.add_subcommand("fidelity", "fidelity bound for one Floquet state pair");
  add_common(fidelity, fi);
  std::vector<std::string> pair;
  double gate_time = 0.0;
  int dimension = 4;
  fidelity->add_option("--pair", pair, "two operation-basis states, e.g. 'g+;0' 'e+;-1'")->expected(2)->required();
  fidelity->add_option("--gate-time", gate_time, "gate time (s)")->required();
  fidelity->add_option("--dimension", dimension, "computational dimension D")->check(CLI::Range(2, 1 << 20));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*analyze) {
      auto dev = load(an);
      auto sched = pick_schedule(dev, an.schedule);
      auto res = cli::analyze_device(dev, sched, an.order, point_options(an));
      emit(an.output, res.report);
      return res.collisions ? 2 : 0;
    }
    if (*sweep) {
      auto dev = load(sw);
      auto sched = pick_schedule(dev, sw.schedule);
      cli::SweepSpec spec;
      spec.axis1 = parse_axis(axis1);
      if (!axis2.empty()) spec.axis2 = parse_axis(axis2);
      spec.order = sw.order;
      spec.point = point_options(sw);
      auto rows = cli::run_sweep(dev, sched, spec);
      if (sw.csv.empty()) {
        cli::write_csv(std::cout, rows);
      } else {
        std::ofstream out(sw.csv);
        if (!out) throw DomainError("cannot write '" + sw.csv + "'");
        cli::write_csv(out, rows);
      }
      return 0;
    }
    if (*census) {
      auto dev = load(ce);
      if (table_iv) {
        auto cells = cli::census_table(dev, max_order, ce.jobs);
        cli::print_census_table(std::cout, dev, cells);
        if (!ce.output.empty()) {
          nlohmann::json j = nlohmann::json::array();
          for (const auto& c : cells) {
            auto row = cli::census_json(c.census);
            row["sublattice"] = c.sublattice;
            j.push_back(row);
          }
          emit(ce.output, j);
        }
        return 0;
      }
      if (center.empty()) throw DomainError("pass --center or --table-iv");
      std::string id = dev.centers.count(center) ? dev.centers.at(center) : center;
      auto sched = pick_schedule(dev, ce.schedule);
      emit(ce.output, cli::census_json(collision_search::census_potential(dev, sched, id, max_order)));
      return 0;
    }
    if (*fidelity) {
      auto dev = load(fi);
      auto sched = pick_schedule(dev, fi.schedule);
      auto r = cli::pair_report(dev, sched, pair[0], pair[1], fi.order, gate_time, dimension, angular(fi.deg_tol_hz));
      emit(fi.output, cli::fidelity_json(r));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
