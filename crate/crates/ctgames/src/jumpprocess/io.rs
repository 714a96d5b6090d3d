//! CSV data formats for event samples and equispaced panels.
//!
//! Event CSV: header `market_id,t,player,action,state_from,state_to`. Times
//! `t` are absolute event times; holding times are derived on load. Player 0
//! is nature; states are 1-based. Each market opens with an origin marker row
//! (`t = 0`, `player = 0`, `action = 0`, `state_from = state_to = k0`) that
//! records the initial state, so markets without events round-trip.
//!
//! Panel CSV: a metadata line `# delta=<value>` followed by the header
//! `market_id,period,state`, with consecutive periods `0..n` per market.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::EventRecord;

/// Continuous-time event records for one market.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketEvents {
    pub id: String,
    pub initial_state: usize,
    pub events: Vec<EventRecord>,
}

/// A collection of per-market continuous-time trajectories.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventSample {
    pub markets: Vec<MarketEvents>,
}

impl EventSample {
    pub fn total_events(&self) -> usize {
        self.markets.iter().map(|m| m.events.len()).sum()
    }
}

/// Equispaced state observations for one market.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketPanel {
    pub id: String,
    pub states: Vec<usize>,
}

/// A collection of equispaced panels sharing a sampling interval.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelSample {
    pub delta: f64,
    pub markets: Vec<MarketPanel>,
}

impl PanelSample {
    pub fn total_transitions(&self) -> usize {
        self.markets.iter().map(|m| m.states.len().saturating_sub(1)).sum()
    }
}

pub fn write_events_csv<W: Write>(writer: W, sample: &EventSample) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["market_id", "t", "player", "action", "state_from", "state_to"])?;
    for m in &sample.markets {
        w.write_record([
            m.id.as_str(),
            "0",
            "0",
            "0",
            &m.initial_state.to_string(),
            &m.initial_state.to_string(),
        ])?;
        let mut t = 0.0;
        for e in &m.events {
            t += e.tau;
            w.write_record([
                m.id.as_str(),
                &format!("{t:.12}"),
                &e.player.to_string(),
                &e.action.to_string(),
                &e.state.to_string(),
                &e.next_state.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_csv<R: Read>(reader: R) -> Result<EventSample> {
    let mut r = csv::Reader::from_reader(reader);
    {
        let headers = r.headers()?;
        let want = ["market_id", "t", "player", "action", "state_from", "state_to"];
        if headers.iter().collect::<Vec<_>>() != want {
            return Err(Error::Data(format!("unexpected event CSV header: {headers:?}")));
        }
    }
    let mut markets: Vec<MarketEvents> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = line + 2; // header occupies line 1
        let id = rec.get(0).unwrap_or_default().to_string();
        let t: f64 = parse_field(&rec, 1, "t", row)?;
        let player: usize = parse_field(&rec, 2, "player", row)?;
        let action: usize = parse_field(&rec, 3, "action", row)?;
        let from: usize = parse_field(&rec, 4, "state_from", row)?;
        let to: usize = parse_field(&rec, 5, "state_to", row)?;
        if from < 1 || to < 1 {
            return Err(Error::Data(format!("row {row}: states are 1-based, got {from} -> {to}")));
        }
        let is_origin = t == 0.0 && player == 0 && action == 0 && from == to;
        match markets.last_mut() {
            Some(m) if m.id == id && !is_origin => {
                let t_prev: f64 = m.events.iter().map(|e| e.tau).sum();
                if t <= t_prev {
                    return Err(Error::Data(format!(
                        "row {row}: market {id} events are not time-ordered ({t} after {t_prev})"
                    )));
                }
                let prev_state = m.events.last().map(|e| e.next_state).unwrap_or(m.initial_state);
                if prev_state != from {
                    return Err(Error::Data(format!(
                        "row {row}: market {id} transition starts at {from} but trajectory is at {prev_state}"
                    )));
                }
                m.events.push(EventRecord { tau: t - t_prev, player, action, state: from, next_state: to });
            }
            _ => {
                if !is_origin {
                    return Err(Error::Data(format!(
                        "row {row}: market {id} must open with an origin row (t=0, player=0, action=0, state_from=state_to)"
                    )));
                }
                if markets.iter().any(|m| m.id == id) {
                    return Err(Error::Data(format!("row {row}: market {id} appears twice non-contiguously")));
                }
                markets.push(MarketEvents { id, initial_state: from, events: Vec::new() });
            }
        }
    }
    Ok(EventSample { markets })
}

pub fn write_panel_csv<W: Write>(mut writer: W, panel: &PanelSample) -> Result<()> {
    writeln!(writer, "# delta={}", panel.delta)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["market_id", "period", "state"])?;
    for m in &panel.markets {
        for (p, s) in m.states.iter().enumerate() {
            w.write_record([m.id.as_str(), &p.to_string(), &s.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_panel_csv<R: Read>(reader: R) -> Result<PanelSample> {
    let mut buf = BufReader::new(reader);
    let mut meta = String::new();
    buf.read_line(&mut meta)?;
    let meta = meta.trim();
    let delta: f64 = meta
        .strip_prefix("# delta=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Data(format!("panel CSV must begin with '# delta=<value>', found '{meta}'")))?;
    if !(delta > 0.0) {
        return Err(Error::Data(format!("panel delta must be > 0, got {delta}")));
    }
    let mut r = csv::Reader::from_reader(buf);
    {
        let headers = r.headers()?;
        if headers.iter().collect::<Vec<_>>() != ["market_id", "period", "state"] {
            return Err(Error::Data(format!("unexpected panel CSV header: {headers:?}")));
        }
    }
    let mut markets: Vec<MarketPanel> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = line + 3; // metadata + header occupy lines 1-2
        let id = rec.get(0).unwrap_or_default().to_string();
        let period: usize = parse_field(&rec, 1, "period", row)?;
        let state: usize = parse_field(&rec, 2, "state", row)?;
        if state < 1 {
            return Err(Error::Data(format!("row {row}: states are 1-based, got {state}")));
        }
        match markets.last_mut() {
            Some(m) if m.id == id => {
                if period != m.states.len() {
                    return Err(Error::Data(format!(
                        "row {row}: market {id} expected period {}, got {period}",
                        m.states.len()
                    )));
                }
                m.states.push(state);
            }
            _ => {
                if markets.iter().any(|m| m.id == id) {
                    return Err(Error::Data(format!("row {row}: market {id} appears twice non-contiguously")));
                }
                if period != 0 {
                    return Err(Error::Data(format!("row {row}: market {id} must start at period 0")));
                }
                markets.push(MarketPanel { id, states: vec![state] });
            }
        }
    }
    Ok(PanelSample { delta, markets })
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, row: usize) -> Result<T> {
    rec.get(idx)
        .ok_or_else(|| Error::Data(format!("row {row}: missing field '{name}'")))?
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("row {row}: cannot parse field '{name}' from '{}'", rec.get(idx).unwrap_or(""))))
}

/// Writes an event sample to a file path.
pub fn write_events_file(path: &Path, sample: &EventSample) -> Result<()> {
    write_events_csv(std::fs::File::create(path)?, sample)
}

/// Writes a panel sample to a file path.
pub fn write_panel_file(path: &Path, panel: &PanelSample) -> Result<()> {
    write_panel_csv(std::fs::File::create(path)?, panel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EventSample {
        EventSample {
            markets: vec![
                MarketEvents {
                    id: "1".into(),
                    initial_state: 3,
                    events: vec![
                        EventRecord { tau: 0.5, player: 0, action: 0, state: 3, next_state: 4 },
                        EventRecord { tau: 1.25, player: 1, action: 1, state: 4, next_state: 1 },
                    ],
                },
                MarketEvents { id: "2".into(), initial_state: 7, events: vec![] },
            ],
        }
    }

    #[test]
    fn events_roundtrip_including_empty_market() {
        let s = sample();
        let mut buf = Vec::new();
        write_events_csv(&mut buf, &s).unwrap();
        let back = read_events_csv(buf.as_slice()).unwrap();
        assert_eq!(back.markets.len(), 2);
        assert_eq!(back.markets[1].initial_state, 7);
        assert!(back.markets[1].events.is_empty());
        assert_eq!(back.markets[0].events[0].next_state, 4);
        assert!((back.markets[0].events[1].tau - 1.25).abs() < 1e-9);
    }

    #[test]
    fn out_of_order_events_rejected() {
        let csv = "market_id,t,player,action,state_from,state_to\n\
                   1,0,0,0,3,3\n\
                   1,2.0,0,0,3,4\n\
                   1,1.0,1,1,4,1\n";
        assert!(matches!(read_events_csv(csv.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn panel_roundtrip_and_delta_metadata() {
        let p = PanelSample {
            delta: 0.5,
            markets: vec![
                MarketPanel { id: "a".into(), states: vec![1, 1, 2, 2] },
                MarketPanel { id: "b".into(), states: vec![5] },
            ],
        };
        let mut buf = Vec::new();
        write_panel_csv(&mut buf, &p).unwrap();
        let back = read_panel_csv(buf.as_slice()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.total_transitions(), 3);
    }

    #[test]
    fn panel_missing_metadata_rejected() {
        let csv = "market_id,period,state\na,0,1\n";
        assert!(matches!(read_panel_csv(csv.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn panel_gap_in_periods_rejected() {
        let csv = "# delta=1\nmarket_id,period,state\na,0,1\na,2,2\n";
        assert!(matches!(read_panel_csv(csv.as_bytes()), Err(Error::Data(_))));
    }
}
