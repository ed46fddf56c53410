use fsi_core::config::RunConfig;
use fsi_core::solver::{self, fluid::{kinetic_energy, Metric}};

fn main() {
    for &(amp, nx, nz) in &[(-0.15f64, 48usize, 24usize), (-0.015, 48, 24), (-0.15, 96, 48)] {
        let text = format!(r#"
[params]
rho_f = 1.0
rho_s = 1.0
mu = 0.1
alpha = 0.02
beta = 0.5
gamma = 0.05
length = 1.0

[grid]
nx = {nx}
nz = {nz}
dt = 1e-3
t_end = 0.02

[initial]
profile = "bump"
amplitude = {amp}
"#);
        let cfg = RunConfig::from_toml(&text).unwrap();
        let tols = solver::fluid::FluidTols::default();
        let data = solver::init::assemble_initial_data(&cfg, &tols).unwrap();
        let reg = solver::init::regularize_initial_data(&data, 0.05, &cfg, &tols).unwrap();
        let mut sim = reg.sim.clone();
        let e0 = reg.energy;
        let mut defect_sum = 0.0;
        for _ in 0..20 {
            let h_old = sim.beam.height();
            let m_old = Metric::frozen(sim.fluid.grid, &h_old).unwrap();
            let ke_old = kinetic_energy(&sim.fluid, &m_old, &cfg.params);
            let (next, report) = solver::coupled_step(&sim, 1e-3, &cfg.params, &cfg.coupling, &tols, None).unwrap();
            let h_new = next.beam.height();
            let m_new = Metric::frozen(next.fluid.grid, &h_new).unwrap();
            let ke_new = kinetic_energy(&next.fluid, &m_new, &cfg.params);
            // fluid défect: dKE + dissipation + work-given-to-beam
            let defect = (ke_new - ke_old) + report.dissipation_fluid + report.load_work;
            defect_sum += defect;
            sim = next;
        }
        println!("amp={amp:+.3} grid={nx}x{nz}  e0={e0:.4e}  cum_defect={defect_sum:+.4e}  rel={:+.3e}", defect_sum / e0);
    }
}
