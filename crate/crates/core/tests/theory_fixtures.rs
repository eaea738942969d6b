use eeep_core::theory::{self, reference, TheoryInputs};

fn pct(x: f64) -> f64 {
    100.0 * x
}

#[test]
fn every_reference_trace_reproduces_its_theory_column() {
    let traces = reference::traces();
    assert_eq!(traces.len(), 5);
    for tr in traces {
        let inp = tr.inputs();
        let rep = &tr.reported.theory;
        let p_eee = theory::p_eee_theory(&inp).unwrap();
        let p_eeep = theory::p_eeep_theory(&inp).unwrap();
        let (p_u, _) = theory::mix_u(p_eee, p_eeep, 0.0, 0.0, inp.usage);
        let e_eee = theory::energy_from_quiet_fraction(p_eee, &inp);
        let e_u = theory::energy_from_quiet_fraction(p_u, &inp);
        let eg = theory::energy_gain(&inp).unwrap();
        let label = &tr.label;
        assert!(
            (pct(p_eee) - pct(rep.p_eee)).abs() <= 0.3,
            "{label} p_eee {p_eee}"
        );
        assert!((pct(p_u) - pct(rep.p_u)).abs() <= 0.3, "{label} p_u {p_u}");
        assert!((e_eee - rep.e_eee).abs() <= 0.3, "{label} e_eee {e_eee}");
        assert!((e_u - rep.e_u).abs() <= 0.3, "{label} e_u {e_u}");
        assert!((pct(eg) - pct(rep.eg)).abs() <= 0.3, "{label} eg {eg}");
    }
}

#[test]
fn simulated_column_stays_close_to_theory() {
    // the published simulation figures sit within a point of the closed form
    for tr in reference::traces() {
        let (th, sim) = (&tr.reported.theory, &tr.reported.sim);
        assert!((th.p_eee - sim.p_eee).abs() < 0.01, "{}", tr.label);
        assert!((th.eg - sim.eg).abs() < 0.02, "{}", tr.label);
    }
}

#[test]
fn p_tau_sweep_matches_reference_rows() {
    let tr = reference::find("Real1").unwrap();
    let ps: Vec<f64> = tr.p_tau_sweep.iter().map(|r| r.p_tau).collect();
    let rows = theory::eg_vs_ptau_sweep(&tr.inputs(), &ps).unwrap();
    for (row, (p, eg)) in tr.p_tau_sweep.iter().zip(rows) {
        assert_eq!(row.p_tau, p);
        assert!(
            (pct(eg) - pct(row.eg_theory)).abs() <= 0.3,
            "p_tau {p}: {eg}"
        );
    }
    let nd: Vec<f64> = tr.p_tau_sweep.iter().map(|r| r.non_delayed).collect();
    assert!(nd.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn always_on_catches_eee_before_eeep() {
    let inp = TheoryInputs {
        t_pack: 5.68e-6,
        ..TheoryInputs::default()
    };
    let (lim_eee, lim_eeep) = theory::load_limits(&inp);
    let (raw_eee, raw_eeep) = theory::load_limits_raw(&inp);
    let mut sign_changes = [Vec::new(), Vec::new()];
    let mut prev = theory::efficiency_gains_at(&inp, 1.0);
    for n in 2..=lim_eeep + 1 {
        let g = theory::efficiency_gains_at(&inp, n as f64);
        if (prev.0 > 0.0) != (g.0 > 0.0) {
            sign_changes[0].push(n);
        }
        if (prev.1 > 0.0) != (g.1 > 0.0) {
            sign_changes[1].push(n);
        }
        prev = g;
    }
    assert_eq!(sign_changes[0].len(), 1);
    assert_eq!(sign_changes[1].len(), 1);
    assert!((sign_changes[0][0] as f64 - raw_eee).abs() <= 1.0);
    assert!((sign_changes[1][0] as f64 - raw_eeep).abs() <= 1.0);
    assert!(sign_changes[0][0] < sign_changes[1][0]);
    assert_eq!((lim_eee, lim_eeep), (137, 156));
}
