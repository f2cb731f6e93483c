#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>

#include "mavctl/sysid.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Flight-log system identification"};
  app.require_subcommand(1);

  std::string log_path, channel_name_arg;
  int order = 1;

  auto* fit = app.add_subcommand("fit", "Fit a channel model from a flight log");
  fit->add_option("--log", log_path, "FlightLog CSV")->required();
  fit->add_option("--channel", channel_name_arg, "phi | theta | psidot | vz")
      ->required();
  fit->add_option("--order", order, "Model order (1 or 2)")
      ->check(CLI::IsMember({1, 2}));

  CLI11_PARSE(app, argc, argv);

  try {
    const auto channel = mavctl::channel_from_name(channel_name_arg);
    if (!channel) {
      std::cerr << "unknown channel: " << channel_name_arg << "\n";
      return 2;
    }

    const mavctl::FlightLog log = mavctl::FlightLog::load_csv(log_path);
    const double lambda = mavctl::estimate_scale(log, *channel);
    const double dt = log.mean_dt();

    std::vector<double> u = log.command_series(*channel);
    for (auto& v : u) v *= lambda;
    std::vector<double> y = log.response_series(*channel);
    if (y.size() < u.size()) u.resize(y.size());

    std::printf("channel=%s\n", mavctl::channel_name(*channel));
    std::printf("lambda=%.10g\n", lambda);
    std::printf("dt=%.10g\n", dt);
    if (order == 1) {
      const mavctl::FirstOrderModel m = mavctl::fit_first_order(u, y, dt);
      std::printf("order=1\nk=%.10g\ntau=%.10g\n", m.k, m.tau);
    } else {
      const mavctl::SecondOrderModel m = mavctl::fit_second_order(u, y, dt);
      std::printf("order=2\nk=%.10g\nzeta=%.10g\nomega=%.10g\n", m.k, m.zeta,
                  m.omega);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
