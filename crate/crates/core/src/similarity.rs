//! Spatial agreement between tweet-reported events and authority records.
//!
//! Authority records become a graph of Earth-centred Cartesian nodes, each
//! weighted by its distance to the city centre. A tweet event's
//! dissimilarity is its smallest centre-weighted distance to any node.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{to_cartesian, CartesianPoint, GeoPoint};
use crate::text::EventClass;

/// Smallest node-to-centre distance used as a weight, in metres.
pub const LAMBDA_FLOOR_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthorityKind {
    Traffic,
    Sociocultural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorityRecord {
    pub kind: AuthorityKind,
    pub location: GeoPoint,
    pub timestamp: DateTime<Utc>,
    pub category: String,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub title: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub point: CartesianPoint,
    pub timestamp: DateTime<Utc>,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventGraph {
    pub centre: CartesianPoint,
    pub nodes: Vec<GraphNode>,
    /// Per-node weight: distance to the centre, floored at [`LAMBDA_FLOOR_M`].
    pub lambda: Vec<f64>,
}

impl EventGraph {
    pub fn from_nodes(nodes: Vec<GraphNode>, centre: CartesianPoint) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let lambda = nodes
            .iter()
            .map(|n| n.point.distance(&centre).max(LAMBDA_FLOOR_M))
            .collect();
        Ok(EventGraph { centre, nodes, lambda })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node minimising `d(p, node) / lambda` and that ratio.
    /// Ties go to the lowest index.
    pub fn nearest(&self, p: &CartesianPoint) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, (n, l)) in self.nodes.iter().zip(&self.lambda).enumerate() {
            let r = p.distance(&n.point) / l;
            if r < best.1 {
                best = (j, r);
            }
        }
        best
    }
}

pub fn build_graph(records: &[AuthorityRecord], centre: GeoPoint) -> Result<EventGraph> {
    let nodes = records
        .iter()
        .map(|r| GraphNode {
            point: to_cartesian(r.location),
            timestamp: r.timestamp,
            category: r.category.clone(),
        })
        .collect();
    EventGraph::from_nodes(nodes, to_cartesian(centre))
}

/// Mean and population variance of each point's weighted nearest-node
/// distance, or `None` when there are no points.
pub fn dissimilarity_points(points: &[CartesianPoint], graph: &EventGraph) -> Option<(f64, f64)> {
    if points.is_empty() {
        return None;
    }
    let mins: Vec<f64> = points.iter().map(|p| graph.nearest(p).1).collect();
    let n = mins.len() as f64;
    let mu = mins.iter().sum::<f64>() / n;
    let var = mins.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / n;
    Some((mu, var))
}

pub fn dissimilarity(locations: &[GeoPoint], graph: &EventGraph) -> Option<(f64, f64)> {
    let pts: Vec<CartesianPoint> = locations.iter().map(|&p| to_cartesian(p)).collect();
    dissimilarity_points(&pts, graph)
}

/// `1 - mu / max(mu)` clamped to `[0, 1]`; all zero when every mean is zero.
pub fn similarities(mu: &BTreeMap<EventClass, f64>) -> BTreeMap<EventClass, f64> {
    let max = mu.values().copied().fold(0.0, f64::max);
    mu.iter()
        .map(|(&c, &m)| {
            let s = if max > 0.0 {
                (1.0 - m / max).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (c, s)
        })
        .collect()
}

/// A located tweet event, as consumed by the similarity analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocatedEvent {
    pub classes: BTreeSet<EventClass>,
    pub location: GeoPoint,
    pub time: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadTimeStats {
    pub n_events: usize,
    pub n_early: usize,
    pub fraction_early: f64,
    /// Mean lead over early events only; `None` when none was early.
    pub mean_lead_minutes: Option<f64>,
}

/// For each event, the lead of its weighted-nearest node's timestamp over
/// the event time. Positive leads mean the tweet came first.
pub fn lead_times(events: &[(GeoPoint, DateTime<Utc>)], graph: &EventGraph) -> LeadTimeStats {
    let mut early = Vec::new();
    for &(p, t) in events {
        let (j, _) = graph.nearest(&to_cartesian(p));
        let lead = (graph.nodes[j].timestamp - t).num_milliseconds() as f64 / 1000.0;
        if lead > 0.0 {
            early.push(lead);
        }
    }
    let n = events.len();
    LeadTimeStats {
        n_events: n,
        n_early: early.len(),
        fraction_early: if n == 0 { 0.0 } else { early.len() as f64 / n as f64 },
        mean_lead_minutes: if early.is_empty() {
            None
        } else {
            Some(early.iter().sum::<f64>() / early.len() as f64 / 60.0)
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub class: EventClass,
    pub mu: f64,
    pub sigma: f64,
    pub similarity: f64,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub rows: Vec<SimilarityRow>,
    /// Classes requested but without any located event.
    pub absent: Vec<EventClass>,
    pub lead_times: Option<LeadTimeStats>,
}

/// Per-class dissimilarity and similarity of `events` against `graph`, for
/// each of `classes` (an event with several classes counts in each). Lead
/// times are computed over the events of `lead_class`, if given.
pub fn similarity_report(
    events: &[LocatedEvent],
    graph: &EventGraph,
    classes: &[EventClass],
    lead_class: Option<EventClass>,
) -> SimilarityReport {
    let mut stats = BTreeMap::new();
    let mut absent = Vec::new();
    for &c in classes {
        let locs: Vec<GeoPoint> = events
            .iter()
            .filter(|e| e.classes.contains(&c))
            .map(|e| e.location)
            .collect();
        match dissimilarity(&locs, graph) {
            Some((mu, sigma)) => {
                stats.insert(c, (mu, sigma, locs.len()));
            }
            None => absent.push(c),
        }
    }
    let mus: BTreeMap<EventClass, f64> = stats.iter().map(|(c, s)| (*c, s.0)).collect();
    let sims = similarities(&mus);
    let rows = stats
        .into_iter()
        .map(|(class, (mu, sigma, n_events))| SimilarityRow {
            class,
            mu,
            sigma,
            similarity: sims[&class],
            n_events,
        })
        .collect();
    let lead_times = lead_class.map(|lc| {
        let ev: Vec<(GeoPoint, DateTime<Utc>)> = events
            .iter()
            .filter(|e| e.classes.contains(&lc))
            .map(|e| (e.location, e.time))
            .collect();
        lead_times(&ev, graph)
    });
    SimilarityReport {
        rows,
        absent,
        lead_times,
    }
}

impl SimilarityReport {
    /// CSV with header `class,mu,sigma,similarity,n_events`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}
