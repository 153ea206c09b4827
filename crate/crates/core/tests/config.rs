mod common;

use netslice::{load_config, parse_config, Error};

use common::{DESK, TINY};

fn err(text: &str) -> (String, String) {
    match parse_config(text) {
        Err(Error::Config { path, msg }) => (path, msg),
        Err(e) => panic!("expected a config error, got {e}"),
        Ok(_) => panic!("expected a config error"),
    }
}

#[test]
fn desk_config_parses() {
    let sc = parse_config(DESK).unwrap();
    assert_eq!(sc.net.k_paths, 3);
    assert_eq!(sc.config.sim.micro_slots, 60);
    assert_eq!(sc.slices.len(), 3);
    let budgets: Vec<(f64, f64)> = sc
        .slices
        .iter()
        .map(|s| (s.latency_up, s.latency_cp))
        .collect();
    assert_eq!(budgets, vec![(100.0, 20.0), (25.0, 5.0), (300.0, 60.0)]);
    let r: Vec<(f64, f64)> = sc
        .slices
        .iter()
        .map(|s| (s.prb_per_user[0], s.max_share[0]))
        .collect();
    assert_eq!(r, vec![(50.0, 0.6), (10.0, 0.2), (5.0, 0.2)]);
}

#[test]
fn empty_file_names_the_missing_section() {
    let (path, msg) = err("");
    assert_eq!(path, "(root)");
    assert!(msg.contains("substrate"), "{msg}");
}

#[test]
fn share_above_one_is_rejected() {
    let (path, msg) = err(&TINY.replace("max_share = 0.6", "max_share = 1.5"));
    assert_eq!(path, "slices[0].max_share");
    assert_eq!(msg, "R̄ must lie in [0,1]");
}

#[test]
fn unknown_keys_are_rejected() {
    let (path, msg) = err(&TINY.replace(
        "prb_per_user = 5.0",
        "prb_per_user = 5.0\nprb_per_usr = 4.0",
    ));
    assert!(
        path.starts_with("slices[0]") || path.starts_with("slices.0"),
        "{path}"
    );
    assert!(msg.contains("prb_per_usr"), "{msg}");
    let (path, msg) = err(&format!("{TINY}\n[extra]\na = 1\n"));
    assert_eq!(path, "extra");
    assert!(msg.contains("unknown field"), "{msg}");
}

#[test]
fn wrong_types_name_the_field() {
    let (path, _) = err(&TINY.replace("prbs = 100", "prbs = \"many\""));
    assert!(path.contains("substrate.nodes"), "{path}");
    assert!(path.ends_with("prbs"), "{path}");
}

#[test]
fn invariant_violations_name_the_field() {
    let cases = [
        (
            TINY.replace("micro_slots = 4", "micro_slots = 0"),
            "sim.micro_slots",
        ),
        (TINY.replace("samples = 2", "samples = 0"), "sim.samples"),
        (format!("{TINY}overload = 0.9\n"), "sim.overload"),
        (
            TINY.replace("[sim]", "[weights]\ntheta = 2.0\n\n[sim]"),
            "weights.theta",
        ),
        (
            TINY.replace("bandwidth = 100.0", "bandwidth = -1.0"),
            "substrate.links[0]",
        ),
        (
            TINY.replace(
                "kind = \"core\"\nresources",
                "kind = \"core\"\nhosts = [\"g1\"]\nresources",
            ),
            "slices[0].vnfs[1].hosts",
        ),
    ];
    for (text, want) in cases {
        let (path, msg) = err(&text);
        assert!(
            path.starts_with(want),
            "{path} ({msg}) does not start with {want}"
        );
    }
}

#[test]
fn instances_accept_auto_or_a_count() {
    let sc =
        parse_config(&TINY.replace("radio_cost = 1.0", "radio_cost = 1.0\ninstances = 2")).unwrap();
    assert_eq!(sc.slices[0].instances, netslice::slice::Instances::Fixed(2));
    let sc =
        parse_config(&TINY.replace("radio_cost = 1.0", "radio_cost = 1.0\ninstances = \"auto\""))
            .unwrap();
    assert_eq!(
        sc.slices[0].instances,
        netslice::slice::Instances::default()
    );
}

#[test]
fn missing_file_is_an_io_error() {
    let e = load_config(std::path::Path::new("/nonexistent/netslice.toml")).unwrap_err();
    assert!(matches!(e, Error::Io(_)));
}

#[test]
fn fuzz_seeds_behave() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    for entry in std::fs::read_dir(root.join("config")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        if let Ok(sc) = parse_config(&text) {
            assert_eq!(
                parse_config(&sc.resolved_toml()).unwrap().config,
                sc.config,
                "{}",
                path.display()
            );
        }
    }
    let summary = std::fs::read_to_string(root.join("report/summary.json")).unwrap();
    netslice::report::parse_summary(&summary).unwrap();
    let manifest = std::fs::read_to_string(root.join("report/manifest.json")).unwrap();
    let m = netslice::report::parse_manifest(&manifest).unwrap();
    parse_config(&m.config_toml).unwrap();
}
