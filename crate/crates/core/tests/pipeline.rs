use std::fs;
use std::path::{Path, PathBuf};

use webreorg::log_ingest::generate_synthetic_logs;
use webreorg::pipeline::{
    cluster_stage, demo_site, files, ingest_stage, mine_stage, plan_stage, preprocess_stage, run_pipeline,
    ErrorKind, PipelineConfig, Stage,
};
use webreorg::sitegraph::SiteGraph;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    log: PathBuf,
    graph: PathBuf,
}

fn fixture(pages: usize, users: usize, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let site = demo_site(pages, seed);
    let log = root.join("access.log");
    let graph = root.join("site.txt");
    fs::write(&log, generate_synthetic_logs(&site, users, 20, seed).join("\n")).unwrap();
    fs::write(&graph, site.to_text()).unwrap();
    Fixture {
        _dir: dir,
        root,
        log,
        graph,
    }
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn stage_by_stage_matches_full_run() {
    let fx = fixture(15, 50, 7);
    let config = PipelineConfig::default();
    let full = fx.root.join("full");
    let summary = run_pipeline(&config, &fx.log, Some(&fx.graph), &full).unwrap();

    let staged = fx.root.join("staged");
    fs::create_dir_all(&staged).unwrap();
    let mut parts = ingest_stage(&fx.log, &staged).unwrap();
    parts.extend(preprocess_stage(&config, &staged.join(files::RECORDS), Some(&fx.graph), &staged).unwrap());
    parts.extend(cluster_stage(&config, &staged).unwrap());
    parts.extend(mine_stage(&config, &staged).unwrap());
    parts.extend(plan_stage(&config, &staged).unwrap());

    assert_eq!(parts, summary);
    for name in files::ALL {
        if name == files::SUMMARY || name == files::CONFIG {
            continue;
        }
        assert_eq!(read(&full, name), read(&staged, name), "{name}");
    }
    assert_eq!(read(&full, files::SUMMARY), summary.to_text());
}

#[test]
fn reruns_are_byte_identical_and_configs_round_trip() {
    let fx = fixture(20, 30, 11);
    let config = PipelineConfig {
        cluster_algorithm: "kmeans".into(),
        rng_seed: 5,
        ..PipelineConfig::default()
    };
    let (a, b) = (fx.root.join("a"), fx.root.join("b"));
    run_pipeline(&config, &fx.log, Some(&fx.graph), &a).unwrap();
    run_pipeline(&config, &fx.log, Some(&fx.graph), &b).unwrap();
    for name in files::ALL {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(PipelineConfig::from_text(&read(&a, files::CONFIG)).unwrap(), config);
}

#[test]
fn reports_have_a_single_header_line() {
    let fx = fixture(15, 50, 7);
    let out = fx.root.join("out");
    run_pipeline(&PipelineConfig::default(), &fx.log, Some(&fx.graph), &out).unwrap();
    let headers = [
        (files::PAGE_STATS, "page_id,url,S,C"),
        (files::OUTLIERS, "page_id,s,c,class"),
        (files::CLUSTERS, "page_id,s,c,cluster_index"),
        (files::CENTERS, "cluster_index,s,c,rank"),
        (files::ITEMSETS, "items\tsupport_count"),
        (files::RULES, "rule\tsupport\tconfidence"),
        (
            files::PLAN,
            "src,dst,src_url,dst_url,support,confidence,cluster_rank,t_p,efficiency_pct,status",
        ),
    ];
    for (name, header) in headers {
        let text = read(&out, name);
        assert_eq!(text.lines().next(), Some(header), "{name}");
        assert!(text.lines().skip(1).all(|l| !l.starts_with('#')), "{name}");
    }
    let summary = read(&out, files::SUMMARY);
    assert!(summary.lines().any(|l| l.starts_with("mean_improved_efficiency_pct=")));
}

#[test]
fn huge_alpha_gives_empty_plan_and_zero_candidates() {
    let fx = fixture(15, 50, 7);
    let config = PipelineConfig {
        alpha_seconds: 1e9,
        ..PipelineConfig::default()
    };
    let out = fx.root.join("out");
    let summary = run_pipeline(&config, &fx.log, Some(&fx.graph), &out).unwrap();
    assert_eq!(summary.get("pages_after_thresholds"), Some("0"));
    assert_eq!(summary.get("clustered_points"), Some("0"));
    assert_eq!(summary.get("candidates"), Some("0"));
    assert_eq!(summary.get("accepted"), Some("0"));
    assert_eq!(summary.get("mean_improved_efficiency_pct"), Some("NA"));
    assert_eq!(read(&out, files::PLAN).lines().count(), 1);
}

#[test]
fn log_page_missing_from_graph_is_a_tagged_input_error() {
    let fx = fixture(15, 50, 7);
    let small = fx.root.join("small.txt");
    fs::write(&small, demo_site(4, 7).to_text()).unwrap();
    let err = run_pipeline(&PipelineConfig::default(), &fx.log, Some(&small), &fx.root.join("out")).unwrap_err();
    assert_eq!(err.stage, Stage::Preprocess);
    assert_eq!(err.kind, ErrorKind::Input);
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().starts_with("[preprocess] "), "{err}");
    assert!(err.message.contains("absent from graph"), "{err}");
}

#[test]
fn unreadable_log_and_bad_config_fail_with_their_codes() {
    let fx = fixture(5, 2, 1);
    let err = run_pipeline(
        &PipelineConfig::default(),
        &fx.root.join("missing.log"),
        None,
        &fx.root.join("out"),
    )
    .unwrap_err();
    assert_eq!((err.stage, err.exit_code()), (Stage::Ingest, 2));

    let config = PipelineConfig {
        k_clusters: 0,
        ..PipelineConfig::default()
    };
    let err = run_pipeline(&config, &fx.log, None, &fx.root.join("out")).unwrap_err();
    assert_eq!((err.stage, err.exit_code()), (Stage::Config, 1));
}

#[test]
fn stale_cluster_file_is_a_consistency_error() {
    let fx = fixture(15, 50, 7);
    let out = fx.root.join("out");
    run_pipeline(&PipelineConfig::default(), &fx.log, Some(&fx.graph), &out).unwrap();
    let clusters = read(&out, files::CLUSTERS);
    let broken: String = clusters
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 1 { format!("{},9\n", l.rsplit_once(',').unwrap().0) } else { format!("{l}\n") })
        .collect();
    fs::write(out.join(files::CLUSTERS), broken).unwrap();
    let err = plan_stage(&PipelineConfig::default(), &out).unwrap_err();
    assert_eq!((err.stage, err.exit_code()), (Stage::Plan, 3));
}

#[test]
fn graph_is_inferred_from_referrers_when_absent() {
    let fx = fixture(15, 50, 7);
    let out = fx.root.join("out");
    let summary = run_pipeline(&PipelineConfig::default(), &fx.log, None, &out).unwrap();
    let inferred: SiteGraph = read(&out, files::GRAPH).parse().unwrap();
    let real: SiteGraph = read(&fx.root, "site.txt").parse().unwrap();
    for (i, j) in inferred.edges() {
        let (a, b) = (inferred.url(i).unwrap(), inferred.url(j).unwrap());
        let (ri, rj) = (real.pages().id(a).unwrap(), real.pages().id(b).unwrap());
        assert!(real.has_link(ri, rj).unwrap(), "{a} -> {b} is not a real link");
    }
    assert_eq!(summary.get("pages"), Some(inferred.len().to_string().as_str()));
}
