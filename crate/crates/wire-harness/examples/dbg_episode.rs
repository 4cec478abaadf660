use wire_harness::executive::*;
use wire_harness::koopman::{augment_dataset, fit};
use wire_harness::mpc::{fit_linear_baseline, MpcConfig, PiGains, PiNoTwist};
use wire_harness::planner::BoardLayout;
use wire_harness::sim::{scripted_collect, SimParams};

fn main() {
    let params = SimParams::default();
    let trajs = scripted_collect(40, 60, 11, &params).unwrap();
    let aug = augment_dataset(&trajs);
    let koop = fit(&aug).unwrap();
    let lin = fit_linear_baseline(&aug).unwrap();
    let board = BoardLayout::reference();
    let cfg = EpisodeConfig::default();
    let mpc_cfg = MpcConfig {
        state_lower: [-1000.0, -1000.0, -std::f64::consts::PI, 0.0],
        state_upper: [1000.0, 1000.0, std::f64::consts::PI, 100.0],
        ..Default::default()
    };

    let verbose = std::env::args().any(|a| a == "-v");
    for route in ["left", "right"] {
        let plan = board.plan_route(route).unwrap();
        if verbose {
            println!("route {route}: {} waypoints", plan.len());
            for (i, w) in plan.iter().enumerate() {
                println!("  wp{i}: ({:7.1},{:7.1}) f_d={} tags={:?}", w.position.x, w.position.y, w.f_d,
                    w.tags.iter().map(|t| format!("{:?}/{}", t.role, t.clamp_id)).collect::<Vec<_>>());
            }
        }
        for name in ["koopman", "linear", "pi"] {
            let mut tally = std::collections::BTreeMap::new();
            let mut steps_sum = 0;
            for seed in 0..10u64 {
                let mut controller = match name {
                    "koopman" => Controller::Koopman { model: koop.clone(), cfg: mpc_cfg.clone() },
                    "linear" => Controller::Linear { model: lin.clone(), cfg: mpc_cfg.clone() },
                    _ => Controller::Pi(PiNoTwist::new(PiGains::default())),
                };
                let res = run_episode(&board, route, &plan, &mut controller, &params, &cfg, seed).unwrap();
                let key = match res.outcome {
                    Outcome::Success => "ok".to_string(),
                    Outcome::Failure(m) => format!("{}", m.letter()),
                    Outcome::Timeout => "timeout".to_string(),
                };
                steps_sum += res.steps;
                *tally.entry(key).or_insert(0) += 1;
                if verbose && seed == 0 {
                    println!("  [{name}] seed0: {:?} steps={} slip={:.1}", res.outcome, res.steps, res.slip_total_mm);
                    for e in &res.events {
                        println!("    step {:3}: {:?}", e.step, e.kind);
                    }
                }
            }
            println!("route {route} {name:8}: {:?} avg_steps={}", tally, steps_sum / 10);
        }
    }
}
