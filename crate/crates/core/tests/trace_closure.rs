use gftac::presets;
use gftac::runner::{analyze, load_trace, run, simulate};

#[test]
fn written_traces_reload_exactly() {
    for mut cfg in [
        presets::example1(0.6, true),
        presets::example2(0.8, true),
        presets::example3(0.85, true),
        presets::fig3(),
    ] {
        cfg.sim.t_final_s = 10.0;
        let dir = tempfile::tempdir().unwrap();
        let summary = run(&cfg, dir.path()).unwrap();
        let (sc, fresh) = simulate(&cfg).unwrap();
        let loaded = load_trace(&cfg, dir.path()).unwrap();
        assert_eq!(loaded.records, fresh.records, "{}", cfg.name);
        assert_eq!(loaded.jumps, fresh.jumps, "{}", cfg.name);
        assert_eq!(analyze(&loaded, &sc), summary.analysis, "{}", cfg.name);

        let json = std::fs::read_to_string(&summary.summary_path).unwrap();
        let back: gftac::runner::RunSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, summary);
    }
}

#[test]
fn saved_config_reproduces_the_run() {
    let mut cfg = presets::example2(0.6, true);
    cfg.sim.t_final_s = 5.0;
    let a = tempfile::tempdir().unwrap();
    let first = run(&cfg, a.path()).unwrap();
    let reloaded = gftac::config::ScenarioConfig::load(&first.config_path).unwrap();
    assert_eq!(reloaded, cfg);
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(&reloaded, b.path()).unwrap().digest, first.digest);
}
