use clap::Parser;
use gasketlab::cli::{run, Cli};

fn exec(args: &[&str]) -> Result<String, gasketlab::ServiceError> {
    let cli = Cli::try_parse_from(std::iter::once("gasketlab").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    run(cli.command, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

#[test]
fn analyze_prints_invariants() {
    let text = exec(&["analyze", "crossings"]).unwrap();
    assert!(text.contains("proper neighbors     7"), "{text}");
    assert!(text.contains("neighborhoods        19"), "{text}");
    let json: serde_json::Value = serde_json::from_str(&exec(&["analyze", "3,0,0;2,-1,0;2,1,1", "--json"]).unwrap()).unwrap();
    assert_eq!(json["properties"]["finite_nbs"], 2);
    assert!(exec(&["analyze", "1,2"]).is_err());
    assert!(matches!(
        exec(&["analyze", "crossings", "--max-candidates", "5"]),
        Err(gasketlab::ServiceError::Complexity { estimate: 100, .. })
    ));
}

#[test]
fn graph_exports() {
    let dot = exec(&["graph", "gasket"]).unwrap();
    assert!(dot.starts_with("digraph"));
    let json: serde_json::Value = serde_json::from_str(&exec(&["graph", "gasket", "--format", "json", "--all"]).unwrap()).unwrap();
    assert_eq!(json["proper"], 6);
    assert_eq!(json["candidates"], 8);
}

#[test]
fn render_writes_matching_formats() {
    let dir = tempfile::tempdir().unwrap();
    let ppm = dir.path().join("c.ppm");
    let png = dir.path().join("c.png");
    for p in [&ppm, &png] {
        let out = exec(&["render", "crossings", "--out", p.to_str().unwrap(), "--px", "80", "--py", "60"]).unwrap();
        assert!(out.starts_with("wrote"));
    }
    let raw = std::fs::read(&ppm).unwrap();
    assert!(raw.starts_with(b"P6\n80 60\n255\n"));
    let decoded = image::open(&png).unwrap().to_rgb8();
    assert_eq!(decoded.dimensions(), (80, 60));
    assert_eq!(&raw[raw.len() - 80 * 60 * 3..], decoded.as_raw().as_slice());

    let overlay = dir.path().join("f.ppm");
    let text = exec(&["render", "fireworks", "--mode", "overlay", "--px", "64", "--py", "64", "--out", overlay.to_str().unwrap()]).unwrap();
    assert!(text.contains("neighbor ghosts: 36"), "{text}");
    let bad = exec(&["render", "gasket", "--cx", "0", "--cy", "0", "--half", "-1", "--out", overlay.to_str().unwrap()]);
    assert!(matches!(bad, Err(gasketlab::ServiceError::Render(_))));
}

#[test]
fn search_is_reproducible_and_queryable() {
    let dir = tempfile::tempdir().unwrap();
    let run_once = |name: &str| {
        let path = dir.path().join(name);
        exec(&[
            "search", "--seed", "9", "--steps", "300", "--range", "4", "--filters", "dropDisjoint",
            "--fixed-time", "2020-01-01T00:00:00Z", "--out", path.to_str().unwrap(),
        ])
        .unwrap();
        path
    };
    let a = run_once("a.jsonl");
    let b = run_once("b.jsonl");
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert!(bytes.split(|&c| c == b'\n').filter(|l| !l.is_empty()).count() > 1);

    let listing = exec(&["catalog", a.to_str().unwrap(), "--sort", "boundary_dim", "--order", "desc", "--limit", "3"]).unwrap();
    assert!(listing.lines().next().unwrap().contains("matching of"));
    let audit = exec(&["catalog", a.to_str().unwrap(), "--audit", "dropDisjoint"]).unwrap();
    assert!(audit.starts_with("0 of"), "{audit}");
    let page: serde_json::Value =
        serde_json::from_str(&exec(&["catalog", a.to_str().unwrap(), "--where", "proper_nbs=0", "--json"]).unwrap()).unwrap();
    assert_eq!(page["total"], 0);
    assert!(exec(&["catalog", a.to_str().unwrap(), "--where", "holes=1"]).is_err());
}

#[test]
fn search_arguments_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    let out = out.to_str().unwrap();
    assert!(exec(&["search", "--steps", "1", "--filters", "dropAll", "--out", out]).is_err());
    assert!(exec(&["search", "--steps", "1", "--walkers", "0", "--out", out]).is_err());
    assert!(exec(&["search", "--steps", "1", "--start", "0,0,0", "--out", out]).is_err());
    let cli = Cli::try_parse_from(["gasketlab", "search", "--fix-first-rotation", "false"]).unwrap();
    let gasketlab::cli::Command::Search(args) = cli.command else { panic!() };
    assert!(!args.config().unwrap().fix_first_rotation);
}
