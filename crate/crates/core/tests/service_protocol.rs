mod common;

use common::corpus_record;
use gfs_core::service::{handle_line, Request};
use gfs_core::{container, SearchIndex};
use serde_json::Value;

fn call(rec: &mut gfs_core::SummaryRecord, line: &str) -> Value {
    serde_json::from_str(&handle_line(rec, line)).unwrap()
}

#[test]
fn every_response_is_one_json_object() {
    for seed in 0..40 {
        let mut rec = corpus_record(seed).record;
        let n = rec.ingested();
        let d = rec.channels();
        let zeros = serde_json::to_string(&vec![0.0; d]).unwrap();
        let lines = [
            r#"{"op":"inspect"}"#.to_string(),
            format!(r#"{{"op":"interval","t0":0,"t1":{}}}"#, n.max(1)),
            format!(r#"{{"op":"member","value":{zeros}}}"#),
            format!(r#"{{"op":"range","lo":{zeros},"hi":{zeros}}}"#),
            format!(r#"{{"op":"compare","a":[0,{}],"b":[0,{}]}}"#, n.max(1), n.max(1)),
        ];
        for line in &lines {
            let v = call(&mut rec, line);
            assert!(v["ok"].is_boolean(), "{line}");
            if v["ok"] == false {
                assert!(v["error"].is_string());
            }
        }
    }
}

#[test]
fn member_answers_match_the_index() {
    let mut rec = corpus_record(3).record;
    while rec.slots() == 0 {
        rec.ingest(&vec![1.0; rec.channels()]).unwrap();
    }
    let q = rec.aggregate().mean.clone();
    let direct = SearchIndex::from_record(&rec, 8).unwrap().membership(&q).unwrap();
    let v = call(&mut rec, &format!(r#"{{"op":"member","value":{}}}"#, serde_json::to_string(&q).unwrap()));
    assert_eq!(v["result"]["absent_certain"], direct.absent_certain);
    assert_eq!(v["result"]["candidates"].as_array().unwrap().len(), direct.candidates.len());
    assert_eq!(v["result"]["nodes_visited"], direct.nodes_visited);
}

#[test]
fn queries_count_accesses_and_survive_persistence() {
    let mut rec = corpus_record(11).record;
    let n = rec.ingested();
    assert!(n > 0);
    let last = rec.samples_in_time_order().last().unwrap().t_start;
    let before = rec.access.count(last);
    call(&mut rec, &format!(r#"{{"op":"interval","t0":{},"t1":{n}}}"#, n - 1));
    assert!(rec.access.count(last) > before);
    let back = container::read(&container::write(&rec)).unwrap();
    assert_eq!(back.access, rec.access);
}

#[test]
fn ingest_is_the_only_write() {
    assert!(Request::parse(r#"{"op":"ingest","rows":[[1.0]]}"#).unwrap().is_write());
    assert!(!Request::parse(r#"{"op":"inspect"}"#).unwrap().is_write());
    assert!(Request::parse(r#"{"op":"inspect","extra":1}"#).is_err());
}
