//! A structure read from JSON: Heisenberg with a cubic term added to the
//! second field, `X₂ = ∂y + (x/2 + x³)∂τ`. It is still contact, so
//! conjugate times are isolated.
//!
//! ```text
//! cargo run --example custom_structure
//! ```

use subriem::flow::{check_constant_speed, check_ray_velocity, d_exp, integrate_extremal};
use subriem::maslov::count_conjugate_on_ray;
use subriem::structure::{PhaseState, Structure};

const STRUCTURE: &str = r#"{
  "name": "cubic-heisenberg",
  "dim": 3,
  "fields": [
    { "components": [ [ [[0,0,0], 1.0] ], [], [ [[0,1,0], -0.5] ] ] },
    { "components": [ [], [ [[0,0,0], 1.0] ], [ [[1,0,0], 0.5], [[3,0,0], 1.0] ] ] }
  ]
}"#;

fn main() -> anyhow::Result<()> {
    let s = Structure::from_json_str(STRUCTURE)?;
    let point = [0.3, -0.2, 0.1];
    let cov = [0.7, -1.1, 2.5];
    let st = PhaseState::from_slices(&point, &cov)?;
    let jet = s.hamiltonian_jet(&st)?;
    println!("{}: H = {:.6}, grad H = {:.4?}", s.name().unwrap_or("?"), jet.value, jet.gradient.as_slice());

    let traj = integrate_extremal(&s, &point, &cov, 1.0, 1e-10)?;
    println!("endpoint {:.10?}", traj.final_state().q.as_slice());
    println!("d exp ={:.8}", d_exp(&s, &point, &cov, 1e-10)?);
    println!(
        "energy drift {:.2e}, ray velocity margin {:.2e}",
        check_constant_speed(&traj).max_energy_drift,
        check_ray_velocity(&traj)?.margin()
    );

    for c in count_conjugate_on_ray(&s, &[0.0; 3], &[0.6, -0.4, 11.0], 0.05, 1.0, 1e-10)? {
        println!("conjugate time {:.10} (multiplicity {})", c.t, c.multiplicity);
    }
    Ok(())
}
