//! Road-disruption feeds: a JSON array of objects mapped onto authority
//! records through configurable field paths.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geo::{CoordOrder, GeoPoint};
use crate::similarity::{AuthorityKind, AuthorityRecord};
use crate::text::corpus::parse_timestamp;

/// Where each field lives in a feed object. Paths are dot-separated keys;
/// numeric segments index arrays (`geometry.coordinates.0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisruptionMapping {
    pub id_path: String,
    /// A `[a, b]` pair, as a JSON array or a string such as `"[-0.1,51.5]"`.
    pub point_path: Option<String>,
    pub point_order: CoordOrder,
    pub lat_path: Option<String>,
    pub lon_path: Option<String>,
    pub time_path: String,
    pub category_path: String,
    pub title_path: Option<String>,
}

impl Default for DisruptionMapping {
    /// The transport operator's road-disruption shape.
    fn default() -> Self {
        DisruptionMapping {
            id_path: "id".into(),
            point_path: Some("point".into()),
            point_order: CoordOrder::LonLat,
            lat_path: None,
            lon_path: None,
            time_path: "startDateTime".into(),
            category_path: "category".into(),
            title_path: Some("location".into()),
        }
    }
}

pub fn lookup<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.')
        .filter(|s| !s.is_empty())
        .try_fold(v, |cur, seg| match cur {
            Value::Object(m) => m.get(seg),
            Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get(i)),
            _ => None,
        })
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn as_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn point(v: &Value, order: CoordOrder) -> Option<GeoPoint> {
    let pair: Vec<f64> = match v {
        Value::Array(a) => a.iter().filter_map(as_f64).collect(),
        Value::String(s) => s
            .trim_matches(|c: char| c == '[' || c == ']' || c.is_whitespace())
            .split(',')
            .filter_map(|x| x.trim().parse().ok())
            .collect(),
        _ => return None,
    };
    if pair.len() != 2 {
        return None;
    }
    GeoPoint::from_pair([pair[0], pair[1]], order).ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisruptionOutcome {
    pub records: Vec<AuthorityRecord>,
    /// `(array index, reason)` for every dropped object.
    pub dropped: Vec<(usize, String)>,
}

impl DisruptionMapping {
    fn location(&self, obj: &Value) -> Option<GeoPoint> {
        if let (Some(lp), Some(op)) = (&self.lat_path, &self.lon_path) {
            let lat = lookup(obj, lp).and_then(as_f64)?;
            let lon = lookup(obj, op).and_then(as_f64)?;
            return GeoPoint::new(lat, lon).ok();
        }
        self.point_path
            .as_deref()
            .and_then(|p| lookup(obj, p))
            .and_then(|v| point(v, self.point_order))
    }

    fn record(&self, obj: &Value) -> std::result::Result<AuthorityRecord, String> {
        let location = self.location(obj).ok_or("missing or invalid coordinates")?;
        let time = lookup(obj, &self.time_path)
            .and_then(as_text)
            .ok_or("missing timestamp")?;
        let timestamp = parse_timestamp(&time).map_err(|e| e.to_string())?;
        Ok(AuthorityRecord {
            kind: AuthorityKind::Traffic,
            location,
            timestamp,
            category: lookup(obj, &self.category_path).and_then(as_text).unwrap_or_default(),
            source_id: lookup(obj, &self.id_path).and_then(as_text).unwrap_or_default(),
            title: self
                .title_path
                .as_deref()
                .and_then(|p| lookup(obj, p))
                .and_then(as_text)
                .unwrap_or_default(),
        })
    }
}

pub fn parse_disruptions(payload: &str, mapping: &DisruptionMapping) -> Result<DisruptionOutcome> {
    let root: Value = serde_json::from_str(payload)?;
    let Value::Array(items) = root else {
        return Err(Error::Format("disruption payload root must be a JSON array".into()));
    };
    let mut records = Vec::new();
    let mut dropped = Vec::new();
    for (i, obj) in items.iter().enumerate() {
        match mapping.record(obj) {
            Ok(r) => records.push(r),
            Err(reason) => dropped.push((i, reason)),
        }
    }
    Ok(DisruptionOutcome { records, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_array_and_non_array_root() {
        let m = DisruptionMapping::default();
        assert!(parse_disruptions("[]", &m).unwrap().records.is_empty());
        assert!(matches!(parse_disruptions("{}", &m), Err(Error::Format(_))));
    }

    #[test]
    fn operator_shape() {
        let payload = r#"[
          {"id":"TIMS-1","category":"Works","location":"[A40] Westway","point":"[-0.2108,51.5202]","startDateTime":"2016-02-03T07:30:00Z"},
          {"id":"TIMS-2","category":"Collisions","location":"Strand","startDateTime":"2016-02-03T07:40:00Z"}
        ]"#;
        let out = parse_disruptions(payload, &DisruptionMapping::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.dropped.len(), 1);
        let r = &out.records[0];
        assert_eq!(r.location, GeoPoint::new(51.5202, -0.2108).unwrap());
        assert_eq!(r.source_id, "TIMS-1");
        assert_eq!(r.category, "Works");
        assert_eq!(r.title, "[A40] Westway");
    }

    #[test]
    fn explicit_lat_lon_paths_with_indices() {
        let m = DisruptionMapping {
            id_path: "ref".into(),
            point_path: None,
            lat_path: Some("geo.coords.0".into()),
            lon_path: Some("geo.coords.1".into()),
            time_path: "when".into(),
            category_path: "kind".into(),
            title_path: None,
            ..Default::default()
        };
        let payload = json!([
            {"ref": 7, "geo": {"coords": [51.5, "-0.12"]}, "when": "2016-02-03 09:00:00", "kind": "Closure"},
            {"ref": 8, "geo": {"coords": [51.5]}, "when": "2016-02-03 09:00:00"}
        ])
        .to_string();
        let out = parse_disruptions(&payload, &m).unwrap();
        assert_eq!(out.records.len() + out.dropped.len(), 2);
        assert_eq!(out.records[0].source_id, "7");
        assert_eq!(out.dropped[0].0, 1);
    }

    #[test]
    fn path_lookup() {
        let v = json!({"a": {"b": [10, {"c": "x"}]}});
        assert_eq!(lookup(&v, "a.b.1.c"), Some(&json!("x")));
        assert_eq!(lookup(&v, "a.b.5"), None);
        assert_eq!(lookup(&v, "a.z"), None);
    }
}
