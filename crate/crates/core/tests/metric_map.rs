use proptest::prelude::*;
use std::collections::BTreeMap;

use vistacheck_core::criticality::{VistaContext, VistaKind};
use vistacheck_core::metric_map::{
    advance, build_context_map, concat, split, Landmark, MapLayout, MetricGraph, Point, Position, Route, Segment,
    SegmentId,
};

fn point() -> impl Strategy<Value = Point> {
    (-500.0..500.0f64, -500.0..500.0f64).prop_map(|(x, y)| Point::new(x, y))
}

/// A polyline starting at `start` with one to three pieces.
fn polyline_from(start: Point, id: &'static str) -> impl Strategy<Value = Segment> {
    prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 1..4).prop_filter_map("degenerate", move |steps| {
        let mut pts = vec![start];
        for (dx, dy) in steps {
            let last = *pts.last().unwrap();
            pts.push(Point::new(last.x + dx, last.y + dy));
        }
        let s = Segment::polyline(id, pts);
        (s.length() > 1e-3).then_some(s)
    })
}

/// Three segments chained end to start.
fn compatible_triple() -> impl Strategy<Value = (Segment, Segment, Segment)> {
    point()
        .prop_flat_map(|p| polyline_from(p, "a"))
        .prop_flat_map(|a| {
            let end = a.end();
            (Just(a), polyline_from(end, "b"))
        })
        .prop_flat_map(|(a, b)| {
            let end = b.end();
            (Just(a), Just(b), polyline_from(end, "c"))
        })
}

fn arbitrary_segment(id: &'static str) -> impl Strategy<Value = Segment> {
    point().prop_flat_map(move |p| polyline_from(p, id))
}

proptest! {
    #[test]
    fn concat_is_associative_on_chains((a, b, c) in compatible_triple()) {
        let left = concat(&concat(&a, &b).unwrap(), &c).unwrap();
        let right = concat(&a, &concat(&b, &c).unwrap()).unwrap();
        prop_assert!((left.length() - right.length()).abs() < 1e-9);
        prop_assert!(left.same_geometry(&right, 1e-9));
    }

    #[test]
    fn concat_groupings_agree_on_definedness(
        a in arbitrary_segment("a"),
        b in arbitrary_segment("b"),
        c in arbitrary_segment("c"),
    ) {
        let left = concat(&a, &b).and_then(|ab| concat(&ab, &c));
        let right = concat(&b, &c).and_then(|bc| concat(&a, &bc));
        prop_assert_eq!(left.is_some(), right.is_some());
    }

    #[test]
    fn concat_adds_lengths((a, b, _) in compatible_triple()) {
        let ab = concat(&a, &b).unwrap();
        prop_assert!((ab.length() - a.length() - b.length()).abs() < 1e-9);
    }

    #[test]
    fn split_then_concat_recovers_the_segment(s in arbitrary_segment("s"), frac in 0.0..=1.0f64) {
        let at = s.length() * frac;
        let (head, tail) = split(&s, at).unwrap();
        prop_assert!((head.length() - at).abs() < 1e-9);
        let joined = concat(&head, &tail).unwrap();
        prop_assert!((joined.length() - s.length()).abs() < 1e-9);
    }

    #[test]
    fn advance_is_additive(
        lengths in prop::collection::vec(1.0..100.0f64, 1..6),
        start_frac in 0.0..1.0f64,
        a_frac in 0.0..1.0f64,
        b_frac in 0.0..1.0f64,
    ) {
        let legs: Vec<(SegmentId, f64)> =
            lengths.iter().enumerate().map(|(i, l)| (SegmentId::new(format!("s{i}")), *l)).collect();
        let route = Route::through(&legs).unwrap();
        let total = route.length();
        let start = route.position_at(total * start_frac).unwrap();
        let room = total * (1.0 - start_frac);
        let (a, b) = (room * a_frac * 0.5, room * b_frac * 0.5);
        let stepwise = advance(&advance(&start, a, &route).unwrap(), b, &route).unwrap();
        let direct = advance(&start, a + b, &route).unwrap();
        let (s1, s2) = (route.coord_of(&stepwise).unwrap(), route.coord_of(&direct).unwrap());
        prop_assert!((s1 - s2).abs() < 1e-9);
    }

    #[test]
    fn decomposition_covers_every_edge_once(n in 2usize..7, branch in any::<bool>(), internal_at in 0usize..6) {
        let mut g = MetricGraph::new();
        for i in 0..n {
            let internal = i == internal_at % n;
            g.add_edge(format!("v{i}"), Segment::straight(format!("e{i}"), 10.0), format!("v{}", i + 1), internal)
                .unwrap();
        }
        if branch {
            g.add_edge("v1", Segment::straight("side", 10.0), "w", false).unwrap();
        }
        let d = g.decompose().unwrap();
        let mut seen: BTreeMap<SegmentId, usize> = BTreeMap::new();
        for id in d.roads.iter().flat_map(|r| &r.segments).chain(d.junctions.iter().flat_map(|j| &j.segments)) {
            *seen.entry(id.clone()).or_default() += 1;
        }
        prop_assert_eq!(seen.len(), g.edges().len());
        prop_assert!(seen.values().all(|&c| c == 1));
    }
}

#[test]
fn context_maps_place_the_zone_on_the_ego_route() {
    for kind in VistaKind::ALL {
        let map = build_context_map(&VistaContext::standard(kind), MapLayout::default()).unwrap();
        let entry = map.landmark(Landmark::ZoneEntry).expect("zone entry");
        let exit = map.landmark(Landmark::ZoneExit).expect("zone exit");
        let route = map.routes.ego_lane_change.as_ref().unwrap_or(&map.routes.ego);
        let (lo, hi) = map.ego_zone_on(route).expect("ego route crosses the zone");
        assert!(lo <= hi, "{kind}: zone [{lo}, {hi}]");
        assert_eq!(route.coord_of(entry), Some(lo), "{kind}");
        assert_eq!(route.coord_of(exit), Some(hi), "{kind}");
    }
}

#[test]
fn crossing_zone_spans_the_crossing_length() {
    let ctx = VistaContext::standard(VistaKind::CrossingYield);
    let map = build_context_map(&ctx, MapLayout::default()).unwrap();
    let (lo, hi) = map.ego_zone_on(&map.routes.ego).unwrap();
    assert!((hi - lo - ctx.cd).abs() < 1e-9);
    assert!(map.arriving_zone().is_some());
}

#[test]
fn advance_past_the_route_end_fails() {
    let route = Route::through(&[("a".into(), 10.0)]).unwrap();
    assert!(advance(&Position::new("a", 5.0), 6.0, &route).is_err());
    assert!(advance(&Position::new("a", 5.0), -1.0, &route).is_err());
}
