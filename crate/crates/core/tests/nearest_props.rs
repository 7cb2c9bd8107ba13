mod common;

use std::sync::OnceLock;

use access_core::geodesy::{haversine_m, GeoPoint};
use access_core::nearest::{
    batch_compute, knn_geodesic, nearest_by_network, NearestConfig, NearestEngine, Opportunity, OpportunitySet, Origin,
    Status, TravelMode,
};
use access_core::routing::{RouteMetric, StreetGraph};
use access_core::synth::{random_points, SynthCity};
use access_core::transit::{index_lines, TransitNetwork};
use common::{dest_nodes, foot_graph, pt, street_oracle, to_petgraph, transit_fixture, FootOracle};
use proptest::prelude::*;

fn opportunities(points: &[GeoPoint]) -> OpportunitySet {
    OpportunitySet::new(
        points
            .iter()
            .enumerate()
            .map(|(i, p)| Opportunity {
                dest_id: format!("d{i:05}"),
                location: *p,
                metadata: Default::default(),
            })
            .collect(),
    )
    .unwrap()
}

fn origins(points: &[GeoPoint]) -> Vec<Origin> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| Origin {
            id: i.to_string(),
            location: *p,
        })
        .collect()
}

fn cfg(k: usize) -> NearestConfig {
    NearestConfig {
        k,
        mode: TravelMode::Foot,
        metric: RouteMetric::Time,
        ..NearestConfig::default()
    }
}

struct Street {
    city: SynthCity,
    graph: StreetGraph,
}

fn street() -> &'static Street {
    static CELL: OnceLock<Street> = OnceLock::new();
    CELL.get_or_init(|| {
        let city = common::city(20, 20, 5);
        let graph = foot_graph(&city);
        Street { city, graph }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_equals_sort_then_take(seed in any::<u64>(), k in 1usize..30, q in (0.0f64..1.0, 0.0f64..1.0)) {
        let bbox = (-34.62, -34.58, -58.42, -58.38);
        let set = opportunities(&random_points(bbox, 1000, seed));
        let p = pt(-34.62 + 0.04 * q.0, -58.42 + 0.04 * q.1);
        let got: Vec<(usize, f64)> = knn_geodesic(p, &set, k).unwrap().iter().map(|c| (c.entry, c.geodesic_m)).collect();
        let mut want: Vec<(usize, f64)> = set.entries().iter().enumerate().map(|(i, e)| (i, haversine_m(p, e.location))).collect();
        want.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        want.truncate(k);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn larger_k_never_worsens_and_never_beats_oracle(seed in any::<u64>()) {
        let s = street();
        let set = opportunities(&random_points(s.city.bbox(), 40, seed));
        let pg = to_petgraph(&s.graph, RouteMetric::Time, false);
        let nodes = dest_nodes(&s.graph, &set);
        let p = random_points(s.city.bbox(), 1, seed ^ 0x5a5a)[0];
        let oracle = street_oracle(&s.graph, &pg, p, &nodes);
        let mut prev = f64::INFINITY;
        for k in [1, 3, 5, 10, 20, 40] {
            let r = nearest_by_network(p, &set, cfg(k), &s.graph).unwrap();
            let cost = r.travel_time_s.unwrap_or(f64::INFINITY);
            prop_assert!(cost <= prev);
            if let Some((_, best)) = oracle {
                prop_assert!(cost >= best);
            }
            prev = cost;
        }
        let (entry, best) = oracle.unwrap();
        let r = nearest_by_network(p, &set, cfg(40), &s.graph).unwrap();
        prop_assert_eq!(r.travel_time_s, Some(best));
        prop_assert_eq!(r.dest_id.as_deref(), Some(set.entries()[entry].dest_id.as_str()));
    }
}

#[test]
fn evaluated_candidates_are_capped_by_k() {
    let bbox = (-34.7, -34.5, -58.5, -58.3);
    let dests = opportunities(&random_points(bbox, 10_000, 1));
    let probes = random_points(bbox, 10_000, 2);
    for (k, expect) in [(10, 10), (1, 1)] {
        for p in probes.iter().step_by(50) {
            assert_eq!(knn_geodesic(*p, &dests, k).unwrap().len(), expect);
        }
    }
    let few = opportunities(&random_points(bbox, 7, 3));
    assert_eq!(knn_geodesic(probes[0], &few, 10).unwrap().len(), 7);

    let s = street();
    let set = opportunities(&random_points(s.city.bbox(), 3, 4));
    let engine = NearestEngine::street(&set, cfg(10), &s.graph).unwrap();
    let res = batch_compute(&origins(&random_points(s.city.bbox(), 20, 5)), &engine, Some(2)).unwrap();
    assert!(res.iter().all(|r| r.evaluated == 3));
}

#[test]
fn permuting_origins_permutes_results() {
    let s = street();
    let set = opportunities(&random_points(s.city.bbox(), 60, 6));
    let engine = NearestEngine::street(&set, cfg(10), &s.graph).unwrap();
    let os = origins(&random_points(s.city.bbox(), 80, 7));
    let base = batch_compute(&os, &engine, Some(3)).unwrap();
    let mut perm = os.clone();
    perm.reverse();
    perm.rotate_left(17);
    let got = batch_compute(&perm, &engine, Some(1)).unwrap();
    for (o, r) in perm.iter().zip(&got) {
        let i: usize = o.id.parse().unwrap();
        assert_eq!(r, &base[i]);
    }
}

#[test]
fn ties_go_to_the_lowest_dest_id() {
    let s = street();
    let p = s.city.intersection(4, 4);
    let q = s.city.intersection(9, 9);
    // Two destinations at the same spot share a node and a cost.
    let set = OpportunitySet::new(vec![
        Opportunity { dest_id: "b".into(), location: q, metadata: Default::default() },
        Opportunity { dest_id: "a".into(), location: q, metadata: Default::default() },
    ])
    .unwrap();
    let r = nearest_by_network(p, &set, cfg(2), &s.graph).unwrap();
    assert_eq!(r.dest_id.as_deref(), Some("a"));
    assert!(OpportunitySet::new(vec![
        Opportunity { dest_id: "a".into(), location: q, metadata: Default::default() },
        Opportunity { dest_id: "a".into(), location: p, metadata: Default::default() },
    ])
    .is_err());
}

#[test]
fn distance_metric_reports_both_quantities() {
    let s = street();
    let set = opportunities(&random_points(s.city.bbox(), 30, 8));
    let pg = to_petgraph(&s.graph, RouteMetric::Distance, false);
    let nodes = dest_nodes(&s.graph, &set);
    let c = NearestConfig { metric: RouteMetric::Distance, ..cfg(30) };
    for p in random_points(s.city.bbox(), 20, 9) {
        let r = nearest_by_network(p, &set, c, &s.graph).unwrap();
        let (entry, best) = street_oracle(&s.graph, &pg, p, &nodes).unwrap();
        assert_eq!(r.distance_m, Some(best));
        assert_eq!(r.dest_id.as_deref(), Some(set.entries()[entry].dest_id.as_str()));
        assert_eq!(r.value(), r.distance_m);
        assert!(r.travel_time_s.unwrap() > 0.0 || best == 0.0);
    }
}

#[test]
fn transit_nearest_equals_composed_oracle() {
    let fx = transit_fixture(12, 12, 150.0, 2);
    let index = index_lines(fx.lines.clone()).unwrap();
    let net = TransitNetwork::new(&fx.foot, &index).unwrap();
    let set = opportunities(&random_points(fx.city.bbox(), 25, 10));
    let c = NearestConfig {
        k: 25,
        mode: TravelMode::PublicTransport,
        metric: RouteMetric::Time,
        walk_radius_m: 500.0,
    };
    let engine = NearestEngine::transit(&set, c, &net).unwrap();
    let mut oracle = FootOracle::new(&fx.foot);
    let os = origins(&random_points(fx.city.bbox(), 40, 11));
    let res = batch_compute(&os, &engine, Some(2)).unwrap();
    for (o, r) in os.iter().zip(&res) {
        let mut best: Option<(f64, usize)> = None;
        for (i, e) in set.entries().iter().enumerate() {
            if let Some(t) = oracle.plan(index.lines(), o.location, e.location, 500.0).total() {
                if best.is_none_or(|(b, _)| t < b) {
                    best = Some((t, i));
                }
            }
        }
        let (t, i) = best.unwrap();
        assert_eq!(r.status, Status::Ok);
        assert_eq!(r.travel_time_s, Some(t));
        assert_eq!(r.dest_id.as_deref(), Some(set.entries()[i].dest_id.as_str()));
    }
}

#[test]
fn distant_origins_snap_and_report_the_gap() {
    let s = street();
    let set = opportunities(&[s.city.intersection(3, 3)]);
    let far = pt(-34.0, -58.0);
    let r = nearest_by_network(far, &set, cfg(10), &s.graph).unwrap();
    assert_eq!(r.status, Status::Ok);
    let node = common::linear_snap(&s.graph, far);
    assert_eq!(r.snap_distance_m, haversine_m(far, s.graph.node(node)));
    assert!(r.snap_distance_m > 50_000.0);
    assert!(NearestEngine::street(&set, cfg(0), &s.graph).is_err());
    assert!(OpportunitySet::new(Vec::new()).is_ok_and(|e| NearestEngine::street(&e, cfg(5), &s.graph).is_err()));
}
