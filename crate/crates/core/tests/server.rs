use std::collections::BTreeMap;

use framequery::data::preset;
use framequery::harness::{evaluate, synthesize, EvalConfig, ScoreSource};
use framequery::server::serve;
use framequery::{run_episode, FrameSource, LocalFrameSource, RemoteFrameSource, ServerCatalog};

fn catalog_from(records: &[framequery::VideoRecord]) -> ServerCatalog {
    let scores: BTreeMap<String, Vec<f64>> = records
        .iter()
        .map(|r| (r.video_id.clone(), r.scores.clone().unwrap()))
        .collect();
    ServerCatalog::new(scores)
}

#[test]
fn remote_episode_is_identical_to_local() {
    let params = preset("persistent").unwrap();
    let records = synthesize(&params, 2, 300, 41).unwrap();
    let server = serve(catalog_from(&records), "127.0.0.1:0").unwrap();
    let binner = params.binner();

    for record in &records {
        let scores = record.scores.as_ref().unwrap();
        let mut local = LocalFrameSource::new(scores);
        let from_local =
            run_episode(&params, &binner, &mut local, 0.02, Some(&record.labels)).unwrap();

        let mut remote = RemoteFrameSource::connect(server.local_addr(), &record.video_id).unwrap();
        let from_remote =
            run_episode(&params, &binner, &mut remote, 0.02, Some(&record.labels)).unwrap();

        assert_eq!(from_local.to_json(), from_remote.to_json());
        assert_eq!(from_remote.budget_used, 6);
        assert_eq!(local.requests(), 6);
        assert_eq!(remote.requests(), 6);
        let stats = remote.stats().unwrap();
        assert_eq!(stats.total, 6);
        assert_eq!(stats.requests[&record.video_id], 6);
    }
    server.shutdown();
}

#[test]
fn concurrent_sessions_keep_separate_counts() {
    let scores: BTreeMap<String, Vec<f64>> = (0..4)
        .map(|v| {
            (
                format!("v{v}"),
                (0..100).map(|t| t as f64 / 100.0).collect(),
            )
        })
        .collect();
    let server = serve(ServerCatalog::new(scores), "127.0.0.1:0").unwrap();
    let addr = server.local_addr();

    let handles: Vec<_> = (0..8)
        .map(|worker| {
            std::thread::spawn(move || {
                let video = format!("v{}", worker % 4);
                let mut source = RemoteFrameSource::connect(addr, &video).unwrap();
                let fetches = 5 + worker * 3;
                for i in 0..fetches {
                    source.fetch((i * 7) % 100).unwrap();
                    // out-of-range requests never count
                    assert!(source.fetch(100 + i).is_err());
                }
                let stats = source.stats().unwrap();
                assert_eq!(stats.total, fetches as u64);
                assert_eq!(stats.requests[&video], fetches as u64);
                (stats.session, video, fetches as u64)
            })
        })
        .collect();
    let mut expected = BTreeMap::new();
    for h in handles {
        let (session, video, n) = h.join().unwrap();
        expected.insert(session, BTreeMap::from([(video, n)]));
    }
    assert_eq!(server.counters(), expected);
    server.shutdown();
}

#[test]
fn loopback_sweep_matches_local_sweep() {
    let params = preset("persistent").unwrap();
    let records = synthesize(&params, 6, 450, 8).unwrap();
    let server = serve(catalog_from(&records), "127.0.0.1:0").unwrap();
    let config = EvalConfig {
        grid: vec![0.0, 0.01, 0.02, 0.05],
        max_clip_len: 300,
        baseline: true,
        jobs: Some(3),
        ..EvalConfig::default()
    };
    let local = evaluate(&params, &records, &ScoreSource::Local, &config).unwrap();
    let remote = evaluate(
        &params,
        &records,
        &ScoreSource::Remote(server.local_addr().to_string()),
        &config,
    )
    .unwrap();
    assert_eq!(local.to_csv(), remote.to_csv());
    server.shutdown();
}
