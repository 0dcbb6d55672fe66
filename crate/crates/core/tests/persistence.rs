use std::fs;
use std::io::Write;

use proptest::prelude::*;

use couette_lab::checkpoint::{read_checkpoint, write_checkpoint};
use couette_lab::config::{Extension, SimConfig};
use couette_lab::io::{csv_string, read_csv, write_csv};
use couette_lab::nonlinear::{NonlinearState, Solver};
use couette_lab::spectral::Grid;
use couette_lab::threshold::{
    sweep, AuditEntry, BisectOptions, CampaignLog, Classification, Classifier, DataFamily, TransitionCriteria,
};
use couette_lab::{Error, Result};

fn state(seed: u64) -> NonlinearState {
    let g = Grid::new(8, 8, 8, 1.0, 2.0, 1.0).unwrap();
    let mut u = DataFamily {
        seed,
        ..Default::default()
    }
    .generate(g)
    .unwrap();
    u.scale(1e-2);
    NonlinearState::new(u, 1e-2).unwrap()
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ckpt");
    let solver = Solver::new(state(1).grid(), 1e-2);
    let mut s = state(1);
    for _ in 0..5 {
        s = solver.step(&s, 0.1).unwrap();
    }
    s.u.t = solver.next_remap_time(&s);
    let s = solver.remap(&s).unwrap().0;
    write_checkpoint(&s, &path).unwrap();
    let back = read_checkpoint(&path, Some(s.grid())).unwrap();
    assert_eq!(back.t(), s.t());
    assert_eq!(back.remaps(), 1);
    assert_eq!(back.nu, s.nu);
    assert_eq!(back.u.comps, s.u.comps);
}

#[test]
fn checkpoint_rejects_damage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ckpt");
    let s = state(2);
    write_checkpoint(&s, &path).unwrap();
    let good = fs::read(&path).unwrap();

    let other = Grid::new(8, 8, 16, 1.0, 2.0, 1.0).unwrap();
    assert!(matches!(read_checkpoint(&path, Some(other)), Err(Error::DimensionMismatch { .. })));

    fs::write(&path, &good[..good.len() - 8]).unwrap();
    let e = read_checkpoint(&path, None).unwrap_err();
    assert!(matches!(e, Error::Checkpoint { .. }) && e.to_string().contains("truncated"), "{e}");

    let mut extra = good.clone();
    extra.push(0);
    fs::write(&path, &extra).unwrap();
    assert!(read_checkpoint(&path, None).unwrap_err().to_string().contains("trailing"));

    let mut magic = good.clone();
    magic[0] = b'X';
    fs::write(&path, &magic).unwrap();
    assert!(read_checkpoint(&path, None).unwrap_err().to_string().contains("magic"));

    let mut version = good;
    version[4] = 9;
    fs::write(&path, &version).unwrap();
    assert!(read_checkpoint(&path, None).unwrap_err().to_string().contains("version"));
}

#[test]
fn csv_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    let rows = vec![[0.0, 1.0 / 3.0, -2.5e-300], [1.0, f64::MAX, 1e-17]];
    write_csv(&path, &["t", "x", "y"], rows.clone()).unwrap();
    let (h, back) = read_csv(&path).unwrap();
    assert_eq!(h, ["t", "x", "y"]);
    assert_eq!(back, rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>());

    let bad = csv_string(&["t", "x"], [[0.0, 1.0]]) + "1,abc\n";
    fs::write(&path, bad).unwrap();
    assert!(matches!(read_csv(&path), Err(Error::Parse { line: 3, .. })));
    fs::write(&path, "t,x\n1\n").unwrap();
    assert!(matches!(read_csv(&path), Err(Error::Parse { line: 2, .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_serialization_round_trips(
        nu in 1e-6f64..1e-1,
        sigma in 4.6f64..9.0,
        cfl in 0.05f64..0.9,
        n in 2usize..32,
        horizon in proptest::option::of(1.0f64..1e4),
        auto in any::<bool>(),
        seed in any::<u64>(),
        nus in proptest::collection::vec(1e-6f64..1e-1, 1..5),
    ) {
        let mut c = SimConfig::default();
        c.solver.nu = nu;
        c.solver.sigma = sigma;
        c.data.sigma = sigma;
        c.solver.cfl = cfl;
        c.solver.horizon = horizon;
        c.solver.zero_mode_extension = if auto { Extension::Auto } else { Extension::Fixed(nu.recip()) };
        c.domain.nx = 2 * n;
        c.data.seed = seed;
        c.threshold.nus = nus;
        let back = SimConfig::parse(&c.serialize()).unwrap();
        prop_assert_eq!(back, c);
    }
}

/// Threshold at ε = 2ν^{3/2}.
struct Power(f64);

impl Classifier for Power {
    fn classify(&mut self, eps: f64) -> Result<AuditEntry> {
        let hit = eps > 2.0 * self.0.powf(1.5);
        Ok(AuditEntry {
            eps,
            outcome: if hit { Classification::Transitioned } else { Classification::Laminar },
            grid: 8,
            sup_l2: eps,
            nonzero_ratio: 0.0,
        })
    }
}

fn opts(nu: f64) -> BisectOptions {
    BisectOptions {
        bracket: [0.1 * nu.powf(1.5), 10.0 * nu.powf(1.5)],
        tolerance: 1.05,
        ..Default::default()
    }
}

#[test]
fn interrupted_campaign_resumes_to_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let nus = [1e-2, 3e-3, 1e-3, 3e-4];
    let criteria = TransitionCriteria::default();
    let full = sweep(&nus, Power, opts, criteria, "fp", None).unwrap();
    assert!((full.gamma.unwrap() - 1.5).abs() < 0.05);

    let path = dir.path().join("campaign.jsonl");
    let log = CampaignLog::new(&path, "fp");
    sweep(&nus[..2], Power, opts, criteria, "fp", Some(&log)).unwrap();
    // a write torn mid-line
    fs::OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"fingerprint\":\"fp\",\"po").unwrap();
    let resumed = sweep(&nus, Power, opts, criteria, "fp", Some(&log)).unwrap();
    assert_eq!(resumed.points, full.points);
    assert_eq!(resumed.gamma, full.gamma);
    assert_eq!(log.load().unwrap().len(), 4);

    let stale = CampaignLog::new(&path, "other");
    assert!(matches!(stale.load(), Err(Error::Integrity(_))));

    let text = fs::read_to_string(&path).unwrap();
    let start = text.find("\"eps_star\":").unwrap() + 11;
    let pos = start + text[start..].find(|c: char| c.is_ascii_digit() && c != '0').unwrap();
    let mut bytes = text.into_bytes();
    bytes[pos] = if bytes[pos] == b'9' { b'1' } else { bytes[pos] + 1 };
    fs::write(&path, bytes).unwrap();
    assert!(matches!(log.load(), Err(Error::Integrity(_))));
}
