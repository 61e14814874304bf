use chrono::{Duration, TimeZone, Utc};
use urbanpulse_core::geo::{CityFrame, GeoPoint};
use urbanpulse_core::impact::{default_delta_t, likelihood, score_impacts, DEFAULT_CELL_SIZE_DEG};
use urbanpulse_core::{EventAnnotation, EventClass};

fn ann(id: &str, minute: i64, lat: f64, lon: f64, classes: &[EventClass]) -> EventAnnotation {
    EventAnnotation {
        id: id.into(),
        text: String::new(),
        event_types: classes.iter().copied().collect(),
        event_location: None,
        location_text: None,
        tweet_geo: Some(GeoPoint::new(lat, lon).unwrap()),
        tweet_time: Utc.with_ymd_and_hms(2016, 2, 3, 9, 0, 0).unwrap() + Duration::minutes(minute),
        severity: None,
        likelihood: None,
        impact: None,
    }
}

#[test]
fn other_only_annotations_are_left_unscored_and_do_not_count() {
    use EventClass::*;
    let mut a = vec![
        ann("a", 0, 51.5101, -0.1341, &[Crime]),
        ann("b", 2, 51.5102, -0.1342, &[Crime]),
        ann("c", 3, 51.5103, -0.1343, &[Other]),
        ann("d", 4, 51.5104, -0.1344, &[Other]),
        ann("e", 30, 51.5105, -0.1345, &[Crime]),
    ];
    let frame = CityFrame::london();
    score_impacts(&mut a, &frame, DEFAULT_CELL_SIZE_DEG, default_delta_t()).unwrap();
    assert_eq!(a[0].severity, Some(2));
    assert_eq!(a[1].severity, Some(2));
    assert_eq!(a[4].severity, Some(1));
    for other in &a[2..4] {
        assert_eq!((other.severity, other.likelihood, other.impact), (None, None, None));
    }
    let l = likelihood(&frame, a[0].tweet_geo.unwrap());
    assert_eq!(a[0].likelihood, Some(l));
    assert_eq!(a[0].impact, Some(2.0 * l));
}

#[test]
fn multi_label_annotation_counts_neighbours_sharing_any_class() {
    use EventClass::*;
    let mut a = vec![
        ann("a", 0, 51.5101, -0.1341, &[Weather, Transportation]),
        ann("b", 1, 51.5102, -0.1342, &[Transportation]),
        ann("c", 2, 51.5103, -0.1343, &[Transportation]),
        ann("d", 3, 51.5104, -0.1344, &[Weather]),
    ];
    score_impacts(&mut a, &CityFrame::london(), DEFAULT_CELL_SIZE_DEG, default_delta_t()).unwrap();
    assert_eq!(a[0].severity, Some(4));
    assert_eq!(a[1].severity, Some(3));
    assert_eq!(a[3].severity, Some(2));
}
