use std::fs;

use fracgauss::config::parse_config;
use fracgauss::engine::{CouplingParams, Engine, RunStatus, SimulationState};
use fracgauss::experiment::run_single;
use fracgauss::export::parse_series_csv;
use fracgauss::kernel::KernelTable;
use fracgauss::maps::OnSiteMap;
use fracgauss::topology::Topology;

/// Tent map, a second on-site map to exercise the engine's map parameter.
struct Tent;

impl OnSiteMap for Tent {
    fn apply(&self, x: f64) -> f64 {
        1.0 - 2.0 * (x - 0.5).abs()
    }
}

#[test]
fn engine_accepts_other_maps() {
    let x0 = vec![0.1, 0.3, 0.7, 0.2];
    let state = SimulationState::new(x0.clone(), 1e6).unwrap();
    let mut engine = Engine::new(
        KernelTable::build(1.0, 5).unwrap(),
        Topology::ring(4).unwrap(),
        CouplingParams::new(0.0).unwrap(),
        Tent,
        state,
    )
    .unwrap();
    assert_eq!(engine.step().unwrap(), RunStatus::Running);
    for (x, x_next) in x0.iter().zip(engine.state().current()) {
        assert!((Tent.apply(*x) - x_next).abs() < 1e-15);
    }
}

#[test]
fn run_outputs_are_consistent_with_each_other() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "alpha = 0.7\nbeta = -0.6\nepsilon = 0.4\nn = 24\nsteps = 25\ntopology = small-world\nrewire_p = 0.5\n\
         topology_seed = 9\nheatmap_modulus = 4\nkernel_csv = true\nedges_csv = true\noutput_dir = {}\n",
        tmp.path().display()
    );
    let spec = parse_config(&text).unwrap();
    let report = run_single(&spec).unwrap();

    let rows =
        parse_series_csv(&fs::read_to_string(tmp.path().join("series.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 26);
    for (i, (t, mean, std)) in rows.into_iter().enumerate() {
        assert_eq!(t, report.series.times[i]);
        assert_eq!(mean.to_bits(), report.series.mean_field[i].to_bits());
        assert_eq!(std.to_bits(), report.series.spatial_std[i].to_bits());
    }

    // floor(25 / 4) + 1 rows of 24 pixels.
    let pgm = fs::read(tmp.path().join("heatmap.pgm")).unwrap();
    let header = b"P5\n24 7\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert_eq!(pgm.len(), header.len() + 24 * 7);

    let kernel = KernelTable::build(0.7, 25).unwrap();
    let csv = fs::read_to_string(tmp.path().join("kernel.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("m,g_alpha"));
    for (m, line) in lines.enumerate() {
        let (idx, g) = line.split_once(',').unwrap();
        assert_eq!(idx.parse::<usize>().unwrap(), m);
        assert_eq!(
            g.parse::<f64>().unwrap().to_bits(),
            kernel.weights()[m].to_bits()
        );
    }

    let edges = fs::read_to_string(tmp.path().join("edges.csv")).unwrap();
    let mut lines = edges.lines();
    assert_eq!(lines.next(), Some("site,slot,neighbor"));
    let parsed: Vec<Vec<usize>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(parsed.len(), 24 * 4);
    let topo = Topology::small_world(24, 0.5, 9).unwrap();
    for row in parsed {
        assert_ne!(row[0], row[2]);
        assert_eq!(topo.neighbors(row[0]).unwrap()[row[1]], row[2]);
    }
}

#[test]
fn summary_lists_every_parameter_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "alpha = 0.5\nbeta = -0.7\nepsilon = 0.3\nn = 12\nsteps = 8\ntopology = small-world\ntopology_seed = 4\ninit_seed = 17\noutput_dir = {}\n",
        tmp.path().display()
    );
    run_single(&parse_config(&text).unwrap()).unwrap();
    let summary = fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    for key in [
        "alpha=0.5",
        "beta=-0.7",
        "epsilon=0.3",
        "nu=7.5",
        "n=12",
        "steps=8",
        "topology=small-world",
        "rewire_p=",
        "topology_seed=4",
        "init=uniform",
        "init_lo=0",
        "init_hi=1",
        "init_seed=17",
        "blowup_bound=",
        "evolution=fractional",
        "summation=plain",
        "memory_window=full",
        "threads=1",
    ] {
        assert!(
            summary.lines().any(|l| l.starts_with(key)),
            "missing {key} in\n{summary}"
        );
    }
}
