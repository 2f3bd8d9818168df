use asyncq::chain::exploration_params;
use asyncq::mdp::{induced_chain, random_mdp, solve_qstar, BehaviorPolicy, MdpModel, QTable, RandomMdpSpec};
use asyncq::qlearning::{run_q_async, run_q_sync};
use asyncq::sa::{geometric_checkpoints, StepSchedule};
use asyncq::seeding::replication_rng;

const SEEDS: u64 = 21;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

struct Setup {
    mdp: MdpModel,
    policy: BehaviorPolicy,
    qstar: QTable,
    schedule: StepSchedule,
}

fn setup(gamma: f64) -> Setup {
    let spec = RandomMdpSpec::new(3, 2, gamma, 1.0, 0.4);
    let (mdp, policy) = random_mdp(&spec, &mut replication_rng(2020, 0)).unwrap();
    let qstar = solve_qstar(&mdp, 1e-12).unwrap();
    let params = exploration_params(&induced_chain(&mdp, &policy).unwrap()).unwrap();
    let schedule = StepSchedule::theorem_compliant(params.sigma, gamma, params.tau).unwrap();
    Setup { mdp, policy, qstar, schedule }
}

#[test]
fn async_error_drops_tenfold_by_one_million_steps() {
    let s = setup(0.8);
    let horizon = 1_000_000;
    let finals: Vec<f64> = (0..SEEDS)
        .map(|i| {
            let run = run_q_async(&s.mdp, &s.policy, &s.schedule, horizon, &[horizon], &s.qstar, &mut replication_rng(5, i))
                .unwrap();
            run.trace.last().unwrap().error
        })
        .collect();
    let initial = s.qstar.max_abs();
    let med = median(finals);
    assert!(med <= initial / 10.0, "median final error {med} vs initial {initial}");
}

#[test]
fn sync_beats_async_at_equal_iterations() {
    let s = setup(0.8);
    let horizon = 100_000;
    let checkpoints = geometric_checkpoints(horizon);
    let (mut sync, mut asyn) = (Vec::new(), Vec::new());
    for i in 0..SEEDS {
        let a = run_q_async(&s.mdp, &s.policy, &s.schedule, horizon, &checkpoints, &s.qstar, &mut replication_rng(6, i))
            .unwrap();
        let y = run_q_sync(&s.mdp, &s.schedule, horizon, &checkpoints, &s.qstar, &mut replication_rng(6, i)).unwrap();
        asyn.push(a.trace.last().unwrap().error);
        sync.push(y.trace.last().unwrap().error);
    }
    let (ms, ma) = (median(sync), median(asyn));
    eprintln!("median final error: sync {ms:.3e}, async {ma:.3e}, ratio {:.3}", ms / ma);
    assert!(ms <= ma);
}
