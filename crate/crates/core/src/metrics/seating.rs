//! Automated scorer for seat-assignment problems with weighted preferences.
//!
//! Each preference carries a 3-point intensity (1 = low, 3 = high). The
//! scorer evaluates every preference against a plan and reports the
//! satisfaction rate of high- and low-weight preferences and their
//! difference, the prioritization gap.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seat {
    pub id: String,
    #[serde(default)]
    pub attributes: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PreferenceKind {
    /// Wants a seat adjacent to `other`.
    SitNextTo { other: String },
    /// Must not sit adjacent to `other`.
    AvoidAdjacent { other: String },
    /// Wants a seat carrying `attribute` (e.g. "window", "near_exit").
    SeatAttribute { attribute: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preference {
    pub guest: String,
    pub weight: u8,
    #[serde(flatten)]
    pub kind: PreferenceKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeatingProblem {
    pub seats: Vec<Seat>,
    /// Unordered pairs of adjacent seat ids.
    #[serde(default)]
    pub adjacency: Vec<(String, String)>,
    pub guests: Vec<String>,
    #[serde(default)]
    pub preferences: Vec<Preference>,
}

/// Guest name → seat id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeatingPlan {
    pub assignment: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeatingScore {
    /// One flag per preference, in problem order.
    pub satisfied: Vec<bool>,
    /// Satisfaction rate among weight-3 preferences.
    pub s_high: Option<f64>,
    /// Satisfaction rate among weight-1 preferences.
    pub s_low: Option<f64>,
    /// `s_high − s_low`, absent when either rate is undefined.
    pub pg: Option<f64>,
}

pub const HIGH_WEIGHT: u8 = 3;
pub const LOW_WEIGHT: u8 = 1;

impl SeatingProblem {
    pub fn validate(&self) -> Result<()> {
        let seat_ids: BTreeSet<&str> = self.seats.iter().map(|s| s.id.as_str()).collect();
        if seat_ids.len() != self.seats.len() {
            return Err(Error::Config("duplicate seat id".into()));
        }
        let guests: BTreeSet<&str> = self.guests.iter().map(String::as_str).collect();
        if guests.len() != self.guests.len() {
            return Err(Error::Config("duplicate guest name".into()));
        }
        for (a, b) in &self.adjacency {
            for s in [a, b] {
                if !seat_ids.contains(s.as_str()) {
                    return Err(Error::Config(format!("adjacency references unknown seat {s:?}")));
                }
            }
        }
        for p in &self.preferences {
            if !(1..=3).contains(&p.weight) {
                return Err(Error::Config(format!("preference weight {} not in 1..=3", p.weight)));
            }
            if !guests.contains(p.guest.as_str()) {
                return Err(Error::Config(format!("preference for unknown guest {:?}", p.guest)));
            }
            match &p.kind {
                PreferenceKind::SitNextTo { other } | PreferenceKind::AvoidAdjacent { other } => {
                    if !guests.contains(other.as_str()) {
                        return Err(Error::Config(format!("preference references unknown guest {other:?}")));
                    }
                }
                PreferenceKind::SeatAttribute { .. } => {}
            }
        }
        Ok(())
    }
}

fn rate(flags: impl Iterator<Item = bool>) -> Option<f64> {
    let (hit, n) = flags.fold((0usize, 0usize), |(h, n), f| (h + f as usize, n + 1));
    (n > 0).then(|| hit as f64 / n as f64)
}

/// Evaluates every preference against `plan`.
///
/// The plan must seat every guest exactly once, in a known seat, with no
/// seat used twice.
pub fn score_seating(problem: &SeatingProblem, plan: &SeatingPlan) -> Result<SeatingScore> {
    problem.validate()?;
    let seat_index: HashMap<&str, usize> = problem
        .seats
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    for name in plan.assignment.keys() {
        if !problem.guests.contains(name) {
            return Err(Error::InvalidPlan(format!("unknown guest {name:?}")));
        }
    }
    let mut seat_of: HashMap<&str, usize> = HashMap::new();
    let mut used = BTreeSet::new();
    for g in &problem.guests {
        let seat = plan
            .assignment
            .get(g)
            .ok_or_else(|| Error::InvalidPlan(format!("guest {g:?} has no seat")))?;
        let &idx = seat_index
            .get(seat.as_str())
            .ok_or_else(|| Error::InvalidPlan(format!("unknown seat {seat:?}")))?;
        if !used.insert(idx) {
            return Err(Error::InvalidPlan(format!("seat {seat:?} assigned twice")));
        }
        seat_of.insert(g.as_str(), idx);
    }
    let adjacent: BTreeSet<(usize, usize)> = problem
        .adjacency
        .iter()
        .flat_map(|(a, b)| {
            let (a, b) = (seat_index[a.as_str()], seat_index[b.as_str()]);
            [(a, b), (b, a)]
        })
        .collect();

    let satisfied: Vec<bool> = problem
        .preferences
        .iter()
        .map(|p| {
            let mine = seat_of[p.guest.as_str()];
            match &p.kind {
                PreferenceKind::SitNextTo { other } => {
                    adjacent.contains(&(mine, seat_of[other.as_str()]))
                }
                PreferenceKind::AvoidAdjacent { other } => {
                    !adjacent.contains(&(mine, seat_of[other.as_str()]))
                }
                PreferenceKind::SeatAttribute { attribute } => {
                    problem.seats[mine].attributes.contains(attribute)
                }
            }
        })
        .collect();

    let by_weight = |w: u8| {
        rate(
            problem
                .preferences
                .iter()
                .zip(&satisfied)
                .filter(move |(p, _)| p.weight == w)
                .map(|(_, &s)| s),
        )
    };
    let s_high = by_weight(HIGH_WEIGHT);
    let s_low = by_weight(LOW_WEIGHT);
    Ok(SeatingScore {
        satisfied,
        s_high,
        s_low,
        pg: s_high.zip(s_low).map(|(h, l)| h - l),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seats(n: usize) -> Vec<Seat> {
        (0..n)
            .map(|i| Seat {
                id: format!("s{i}"),
                attributes: if i == 0 { ["window".to_string()].into() } else { BTreeSet::new() },
            })
            .collect()
    }

    fn plan(pairs: &[(&str, &str)]) -> SeatingPlan {
        SeatingPlan {
            assignment: pairs.iter().map(|(g, s)| (g.to_string(), s.to_string())).collect(),
        }
    }

    #[test]
    fn no_preferences_means_absent_gap() {
        let p = SeatingProblem {
            seats: seats(2),
            adjacency: vec![],
            guests: vec!["a".into(), "b".into()],
            preferences: vec![],
        };
        let s = score_seating(&p, &plan(&[("a", "s0"), ("b", "s1")])).unwrap();
        assert_eq!((s.s_high, s.s_low, s.pg), (None, None, None));
    }

    #[test]
    fn gap_from_counts() {
        // 4 high-weight prefs with 3 satisfied, 5 low-weight with 2 satisfied.
        let guests: Vec<String> = (0..9).map(|i| format!("g{i}")).collect();
        let mut prefs = Vec::new();
        for (i, g) in guests.iter().enumerate() {
            let (weight, want) = if i < 4 { (3, i < 3) } else { (1, i < 6) };
            prefs.push(Preference {
                guest: g.clone(),
                weight,
                kind: PreferenceKind::SeatAttribute {
                    attribute: if want { "any".into() } else { "none".into() },
                },
            });
        }
        let seats: Vec<Seat> = (0..9)
            .map(|i| Seat { id: format!("s{i}"), attributes: ["any".to_string()].into() })
            .collect();
        let p = SeatingProblem { seats, adjacency: vec![], guests: guests.clone(), preferences: prefs };
        let pl = SeatingPlan {
            assignment: guests.iter().enumerate().map(|(i, g)| (g.clone(), format!("s{i}"))).collect(),
        };
        let s = score_seating(&p, &pl).unwrap();
        assert_eq!(s.s_high, Some(0.75));
        assert_eq!(s.s_low, Some(0.4));
        assert!((s.pg.unwrap() - 0.35).abs() < 1e-12);
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let p = SeatingProblem {
            seats: seats(3),
            adjacency: vec![("s0".into(), "s1".into())],
            guests: vec!["a".into(), "b".into()],
            preferences: vec![],
        };
        assert!(matches!(
            score_seating(&p, &plan(&[("a", "s0"), ("b", "s0")])),
            Err(Error::InvalidPlan(_))
        ));
        assert!(matches!(score_seating(&p, &plan(&[("a", "s0")])), Err(Error::InvalidPlan(_))));
        assert!(matches!(
            score_seating(&p, &plan(&[("a", "s0"), ("b", "s9")])),
            Err(Error::InvalidPlan(_))
        ));
    }

    #[test]
    fn adjacency_is_symmetric() {
        let p = SeatingProblem {
            seats: seats(3),
            adjacency: vec![("s0".into(), "s1".into())],
            guests: vec!["a".into(), "b".into()],
            preferences: vec![
                Preference { guest: "b".into(), weight: 3, kind: PreferenceKind::SitNextTo { other: "a".into() } },
                Preference { guest: "a".into(), weight: 1, kind: PreferenceKind::AvoidAdjacent { other: "b".into() } },
            ],
        };
        let s = score_seating(&p, &plan(&[("a", "s0"), ("b", "s1")])).unwrap();
        assert_eq!(s.satisfied, vec![true, false]);
        assert_eq!(s.pg, Some(1.0));
    }
}
