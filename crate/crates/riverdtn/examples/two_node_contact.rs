//! The smallest possible world: a static sender and receiver 5 m apart.
//!
//! One 100 KB text bundle, compression off. The discovery round at t = 0
//! finds the peer, the first transfer in a contact pays the 1 s inquiry
//! latency, and 819200 bits / 256 kbps = 3.2 s of line time puts delivery at
//! t ≈ 4.2 s (recorded as 4 s; latencies are whole seconds). Walks through
//! the event loop that every larger scenario uses.

use riverdtn::bundle::EndpointId;
use riverdtn::compression::CompressionSetting;
use riverdtn::sim::map::Vec2;
use riverdtn::sim::world::{WorldBuilder, WorldParams};
use riverdtn::sim::ContentClass;

fn main() {
    let params = WorldParams {
        compression: CompressionSetting::disabled(),
        ..WorldParams::default()
    };
    let mut builder = WorldBuilder::new(params);
    let sender = builder.add_static_node(
        EndpointId::new("dtn", "//sender/app").unwrap(),
        Vec2::new(0.0, 0.0),
    );
    let receiver_eid = EndpointId::new("dtn", "//receiver/in").unwrap();
    builder.add_static_node(receiver_eid.clone(), Vec2::new(5.0, 0.0));

    builder.schedule_bundle(sender, receiver_eid, ContentClass::Text, 100 * 1024, 0);

    let metrics = builder.build().run(60).unwrap();
    let text = metrics.class(ContentClass::Text);
    println!("created   {}", text.created);
    println!("delivered {}", text.delivered);
    println!(
        "latency   {:.0} s  (1 s inquiry + 3.2 s at 256 kbps, floored to whole seconds)",
        text.mean_latency_s()
    );
    println!("bits      {}", text.bits_transmitted);
    println!(
        "contacts  {}  (budget clean: {})",
        metrics.audit.contacts,
        metrics.audit.clean()
    );
    assert_eq!(text.delivered, 1);
    assert_eq!(text.mean_latency_s(), 4.0);
}
