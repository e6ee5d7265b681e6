//! Converts the public credit-card fraud CSV (`Time, V1..V28, Amount,
//! Class`) into a `dataset.csv` / `events.csv` pair.
//!
//!     cargo run --release -p eventseer --example creditcard -- creditcard.csv out/
//!
//! Transactions sharing a timestamp are averaged into one sample (the
//! series needs strictly increasing time), and every fraudulent
//! transaction becomes a point event at its time.

use std::collections::BTreeMap;
use std::path::PathBuf;

use eventseer::io::{write_events, write_series};
use eventseer::{EventSet, Interval, TimeSeries};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [input, out] = args.as_slice() else {
        return Err("usage: creditcard <creditcard.csv> <output dir>".into());
    };
    let mut reader = csv::Reader::from_path(input)?;
    let headers = reader.headers()?.clone();
    let time_col = headers.iter().position(|h| h == "Time").ok_or("no Time column")?;
    let class_col = headers.iter().position(|h| h == "Class").ok_or("no Class column")?;
    let features: Vec<usize> = (0..headers.len()).filter(|&i| i != time_col && i != class_col).collect();

    let mut by_time: BTreeMap<u64, (Vec<f64>, usize)> = BTreeMap::new();
    let mut frauds = Vec::new();
    for record in reader.records() {
        let record = record?;
        let t: f64 = record[time_col].parse()?;
        let entry = by_time.entry(t.to_bits()).or_insert_with(|| (vec![0.0; features.len()], 0));
        for (slot, &j) in entry.0.iter_mut().zip(&features) {
            *slot += record[j].parse::<f64>()?;
        }
        entry.1 += 1;
        if record[class_col].trim_matches('"') == "1" {
            frauds.push(Interval { start: t, end: t });
        }
    }
    let mut timestamps = Vec::with_capacity(by_time.len());
    let mut values = Vec::with_capacity(by_time.len() * features.len());
    // non-negative f64 bit patterns sort like the values themselves
    for (bits, (sums, count)) in by_time {
        timestamps.push(f64::from_bits(bits));
        values.extend(sums.iter().map(|s| s / count as f64));
    }
    let names = features.iter().map(|&j| headers[j].to_string()).collect();
    let series = TimeSeries::new(timestamps, values, names)?;
    let out = PathBuf::from(out);
    std::fs::create_dir_all(&out)?;
    write_series(&out.join("dataset.csv"), &series)?;
    let n_frauds = frauds.len();
    write_events(&out.join("events.csv"), &EventSet::new(frauds))?;
    println!("{} samples, {n_frauds} fraud events", series.len());
    Ok(())
}
