#pragma once

namespace vns {

// All tunables in one place; every field is scenario-overridable and can also
// be overridden through VNSIM_PARAM_* environment variables (see scenario.cpp).
struct Params {
  // protocol
  double heartbeat_period = 0.1;
  double failure_timeout = 0.5;  // 5 missed beats

  // transport
  double latency = 0.01;
  double drop_probability = 0.0;

  // time stepping
  double dt_phys = 0.05;
  double dt_sense = 0.1;

  // sensing / pointing / retreat
  double r_sense = 2.0;
  double r_point = 1.5;
  double r_retreat = 0.8;
  double hysteresis = 0.1;
  double retreat_ramp = 0.1;
  double stale_age = 0.5;
  int led_k = 3;

  // docking
  double dock_eps_dist = 0.02;
  double dock_eps_angle = 0.1;

  // go-to-pose controller
  double nav_k_omega = 2.0;
  double nav_k_v = 1.0;
  double nav_align_tol = 0.05;

  // recovery
  double t_recover = 60.0;
  bool auto_recover = false;

  // trace
  int pose_snapshot_stride = 4;  // snapshots every dt_phys * stride
};

}  // namespace vns
