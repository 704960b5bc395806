// Command-line front end: batch studies, mesh export, the touchpad session
// service and event-log replay.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "tactile_eit/error.hpp"
#include "tactile_eit/experiment.hpp"
#include "tactile_eit/hmi.hpp"
#include "tactile_eit/io.hpp"
#include "tactile_eit/service.hpp"

namespace te = tactile_eit;

namespace {

struct CommonOptions {
  std::string config_path;
  bool reference_defaults = false;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Experiment JSON config")->check(CLI::ExistingFile);
  cmd->add_flag("--paper-defaults", o.reference_defaults, "Use the built-in reference settings");
  cmd->add_option("--seed", o.seed, "Noise seed override");
  cmd->add_option("--out", o.out_dir, "Output directory override");
}

te::ExperimentConfig resolve(const CommonOptions& o) {
  if (o.reference_defaults && !o.config_path.empty()) {
    throw CLI::ValidationError("--paper-defaults and --config are mutually exclusive");
  }
  te::ExperimentConfig c = o.config_path.empty() ? te::ExperimentConfig::reference_defaults()
                                                 : te::load_config(o.config_path);
  if (o.seed) c.noise.seed = *o.seed;
  if (!o.out_dir.empty()) c.output_dir = o.out_dir;
  c.validate();
  return c;
}

int cmd_mesh(const te::ExperimentConfig& c, bool with_jacobian) {
  const auto& m = c.mesh;
  const auto sim = te::build_mesh(m.side_mm, m.sim_divisions, m.electrode_count, m.electrode_width_mm);
  const auto recon =
      te::build_mesh(m.side_mm, m.recon_divisions, m.electrode_count, m.electrode_width_mm);
  const auto protocol = te::generate_adjacent_protocol(m.electrode_count, c.reciprocity_reduced);
  te::io::write_text_file(c.output_dir / "sim_mesh.json", te::io::mesh_to_json(sim));
  te::io::write_text_file(c.output_dir / "recon_mesh.json", te::io::mesh_to_json(recon));
  te::io::write_text_file(c.output_dir / "protocol.json", te::io::protocol_to_json(protocol));
  std::printf("sim mesh   %zu elements  id %s\n", sim.element_count(), sim.id().c_str());
  std::printf("recon mesh %zu elements  id %s\n", recon.element_count(), recon.id().c_str());
  std::printf("protocol   %zu patterns  id %s\n", protocol.size(), protocol.id().c_str());
  if (with_jacobian) {
    const auto j = te::compute_jacobian(recon, te::uniform_field(recon), protocol, c.drive_current);
    te::io::write_text_file(c.output_dir / "jacobian.csv", te::io::jacobian_to_csv(j));
    std::printf("jacobian   %zu x %zu\n", j.rows(), j.cols());
  }
  return 0;
}

int cmd_sweep(const te::ExperimentConfig& c) {
  const auto rows = te::compute_sweep(c);
  const auto path = c.output_dir / "sweep.csv";
  te::io::write_text_file(path, te::sweep_to_csv(rows));
  std::printf("%zu rows -> %s\n", rows.size(), path.string().c_str());
  return 0;
}

int cmd_recon(const te::ExperimentConfig& c) {
  const auto outcomes = te::run_reconstruction(c);
  int failures = 0;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++failures;
      std::printf("%-10s %-9s FAILED: %s\n", o.phantom.c_str(), o.method.c_str(), o.error.c_str());
      continue;
    }
    std::printf("%-10s %-9s blobs %zu/%zu", o.phantom.c_str(), o.method.c_str(), o.blob_count,
                o.expected_blobs);
    if (!o.localization_mm.empty()) {
      double worst = 0.0;
      for (double d : o.localization_mm) worst = std::max(worst, d);
      std::printf("  max error %.2f mm", worst);
    }
    if (o.annulus) {
      std::printf("  ring %.0f%%  hole %zu", 100.0 * o.annulus->coverage(),
                  o.annulus->center_covered);
    }
    std::printf("\n");
  }
  std::printf("outputs in %s\n", c.output_dir.string().c_str());
  return failures ? 1 : 0;
}

int cmd_serve(const te::ExperimentConfig& c, std::uint16_t port, const std::string& bind,
              const std::string& log_dir) {
  // Handle SIGINT/SIGTERM on a dedicated thread so stop() runs outside a
  // signal handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::fprintf(stderr, "building pipeline...\n");
  const std::vector<te::ReconstructionParams> methods{c.hmi.method};
  const te::ReconstructionPipeline pipeline(c, methods);
  te::SessionServer::Options options;
  options.port = port;
  options.bind_address = bind;
  if (!log_dir.empty()) options.log_dir = log_dir;
  te::SessionServer server(pipeline, c.hmi, c.noise.seed, options);
  std::fprintf(stderr, "listening on %s:%u (newline JSON or WebSocket)\n", bind.c_str(),
               static_cast<unsigned>(server.port()));

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.serve();
  // serve() only returns after stop(); the waiter has already finished.
  waiter.join();
  return 0;
}

int cmd_replay(const te::ExperimentConfig& c, const std::string& log_path,
               const std::string& out_path) {
  std::ifstream in(log_path);
  if (!in) throw te::EitError(te::ErrorCode::kInvalidArgument, "cannot open " + log_path);
  te::HmiSession session(c.hmi.actions, c.hmi.debounce_frames);
  std::string events;
  std::string line;
  std::size_t states = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto state = te::io::state_from_jsonl(line);
    if (!state) continue;
    ++states;
    const auto out = session.process(*state);
    if (out.event) events += te::io::event_to_jsonl(*out.event, out.action) + "\n";
  }
  if (out_path.empty()) {
    std::cout << events;
  } else {
    te::io::write_text_file(out_path, events);
  }
  std::fprintf(stderr, "replayed %zu states\n", states);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EIT tactile sensor simulator"};
  app.require_subcommand(1);

  CommonOptions mesh_opts, sweep_opts, recon_opts, serve_opts, replay_opts;
  bool with_jacobian = false;
  auto* mesh = app.add_subcommand("mesh", "Export simulation/reconstruction meshes and protocol");
  add_common(mesh, mesh_opts);
  mesh->add_flag("--jacobian", with_jacobian, "Also export the reconstruction Jacobian as CSV");

  auto* sweep = app.add_subcommand("sweep", "Lattice width x touch level x phantom sensitivity table");
  add_common(sweep, sweep_opts);

  auto* recon = app.add_subcommand("recon", "Reconstruct the configured phantoms with each method");
  add_common(recon, recon_opts);

  std::uint16_t port = 8765;
  std::string bind = "127.0.0.1";
  std::string log_dir;
  auto* serve = app.add_subcommand("serve", "Run the touchpad session service");
  add_common(serve, serve_opts);
  serve->add_option("--port", port, "TCP port (0 picks a free one)");
  serve->add_option("--bind", bind, "Bind address");
  serve->add_option("--log-dir", log_dir, "Write a JSON-lines log per session");

  std::string log_path, replay_out;
  auto* replay = app.add_subcommand("replay", "Re-run a session log through the event engine");
  add_common(replay, replay_opts);
  replay->add_option("--log", log_path, "Session JSON-lines log")->required()->check(CLI::ExistingFile);
  replay->add_option("--events", replay_out, "Write events here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mesh) return cmd_mesh(resolve(mesh_opts), with_jacobian);
    if (*sweep) return cmd_sweep(resolve(sweep_opts));
    if (*recon) return cmd_recon(resolve(recon_opts));
    if (*serve) return cmd_serve(resolve(serve_opts), port, bind, log_dir);
    if (*replay) return cmd_replay(resolve(replay_opts), log_path, replay_out);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const te::EitError& e) {
    std::fprintf(stderr, "error [%s]: %s\n", te::to_string(e.code()), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
