// Scratch debugging harness. Not part of the deliverable surface.
use aapd_core::config::*;
use aapd_core::sim::run_experiment;

fn main() {
    let cfg = ScenarioConfig {
        version: 1,
        n_robots: 2,
        algorithm: Algorithm::Gpf,
        arena: ArenaKind::Empty,
        duration_s: 420.0,
        p_max: Some(0.5),
        fault_schedules: FaultPlan::PerRobot(vec![
            FaultSchedule::Spontaneous {
                fault: aapd_core::robot::SpontaneousFault::H1,
                t: 0.0,
                d_init: Draw::Fixed(1.0),
            },
            FaultSchedule::None,
        ]),
        detection: DetectionMode::Offline,
        online_action: OnlineAction::ReturnToBase,
        seed: 0,
        replicates: 1,
    };
    let out = run_experiment(&cfg, 7, 0).unwrap();
    for e in &out.summary.lost {
        println!("LOST robot {} at tick {} ({} s)", e.robot, e.tick, e.tick as f64 / 6.0);
    }
    for e in &out.summary.deposits {
        println!("DEPOSIT robot {} at tick {}", e.robot, e.tick);
    }
    println!("recharges {}", out.summary.recharges);
    // Robot 1 story every 10 s.
    for tick in (60..=out.log.n_ticks).step_by(60) {
        let r = out.log.record(tick, 1);
        println!(
            "t={:>5.0} pos=({:.2},{:.2}) h={:+.2} P={:.3} mode={} carry={} v={:.3}",
            r.time_s, r.pos_x, r.pos_y, r.heading, r.power, r.mode, r.carrying, r.v
        );
    }
}
