//! Run the office-walkers preset: six people pacing a 6.32 m square.
//!
//! Node 0 sends ten 100 KB text bundles to node 1 at t = 0; everyone walks
//! random waypoints, and epidemic routing floods copies so the destination
//! collects them from whoever is nearby. Prints the delivery tally and the
//! link audit.

use riverdtn::sim::scenario::{run, testbed_config};
use riverdtn::sim::ContentClass;

fn main() {
    let mut config = testbed_config();
    config.seed = 42;
    let metrics = run(&config).unwrap();
    let text = metrics.class(ContentClass::Text);

    println!("office preset, seed {}", config.seed);
    println!("created        {}", text.created);
    println!("delivered      {}", text.delivered);
    println!("mean latency   {:.1} s", text.mean_latency_s());
    println!("copies stored  {} (epidemic fan-out)", metrics.copies_stored);
    println!("contacts       {}", metrics.audit.contacts);
    println!(
        "transfers      {} completed, {} aborted mid-contact",
        metrics.audit.transfers_completed, metrics.audit.transfers_aborted
    );
    println!("audit clean    {}", metrics.audit.clean());
    assert_eq!(text.delivered, text.created);
}
