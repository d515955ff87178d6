use canalrl_core::checkpoint::AgentCheckpoint;
use canalrl_core::env::{ActionIncrement, CanalEnv, EnvConfig};
use canalrl_core::expert::{expert_action, ExpertPolicyParams};
use canalrl_core::nn::mlp_forward;
use canalrl_core::sac::{select_action, ActionMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let path = std::env::args().nth(1).unwrap();
    let ckpt = AgentCheckpoint::load(std::path::Path::new(&path)).unwrap();
    let env = CanalEnv::new(EnvConfig::default()).unwrap();
    let nets = &ckpt.nets;
    let (state, obs) = env.reset(777);

    // Policy head at the start state
    let out = mlp_forward(&nets.policy, &obs).unwrap();
    println!("mu: {:?}", &out[..5].iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    println!("log_std(raw): {:?}", &out[5..].iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());

    // Q at the start state for: policy action, oracle action, gentle half-speed forward
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pol_a = select_action(nets, &obs, ActionMode::Deterministic, &mut rng).unwrap();
    let orc_a = expert_action(&state, &env, &ExpertPolicyParams { action_noise_std: 0.0, ..Default::default() }, &mut rng).unwrap().to_vector().to_vec();
    let q_of = |a: &[f64]| {
        let mut input = obs.to_vec();
        input.extend_from_slice(a);
        mlp_forward(&nets.q, &input).unwrap()[0]
    };
    let v_of = |o: &[f64]| mlp_forward(&nets.value, o).unwrap()[0];
    println!("V(s0) = {:.1}", v_of(&obs));
    println!("Q(s0, policy)  = {:.1}  a={:?}", q_of(&pol_a), pol_a.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());
    println!("Q(s0, oracle)  = {:.1}  a={:?}", q_of(&orc_a), orc_a.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());

    // Actual returns: roll deterministic policy vs oracle and report undiscounted return + forces
    for (name, oracle) in [("policy", false), ("oracle", true)] {
        let (mut st, mut ob) = env.reset(777);
        let mut rr = 0.0; let mut fsum = 0.0; let mut fmax: f64 = 0.0; let mut n = 0;
        let mut rng2 = ChaCha8Rng::seed_from_u64(2);
        while !st.done {
            let a = if oracle {
                expert_action(&st, &env, &ExpertPolicyParams { action_noise_std: 0.0, ..Default::default() }, &mut rng2).unwrap()
            } else {
                let v = select_action(nets, &ob, ActionMode::Deterministic, &mut rng2).unwrap();
                ActionIncrement::from_vector(v.as_slice().try_into().unwrap())
            };
            let (ns, no, ev) = env.step(&st, &a).unwrap();
            rr += canalrl_core::reward::compute_reward(&canalrl_core::reward::RewardInputs {
                checkpoint_reached: ev.checkpoint_reached, force: ev.applied_force_modulus,
                dt: ev.dt, checkpoint_distance_mm: ev.checkpoint_distance_mm,
            }, &Default::default()).unwrap();
            fsum += ev.applied_force_modulus; fmax = fmax.max(ev.applied_force_modulus); n += 1;
            st = ns; ob = no;
        }
        println!("{name}: return {:.1}, steps {}, success {}, mean F {:.2}, max F {:.2}", rr, n, st.success, fsum / n as f64, fmax);
    }
}
