use riverdtn::sim::scenario::{riverside_config, run};
use riverdtn::sim::ContentClass;

fn main() {
    let mut config = riverside_config();
    config.nodes.people = 150;
    config.duration_s = 10 * 86_400;
    config.seed = 1;
    let mut quiet = false;
    for arg in std::env::args().skip(1) {
        let (key, value) = arg.split_once('=').expect("key=value");
        let u = || value.parse::<u64>().unwrap();
        let f = || value.parse::<f64>().unwrap();
        let pair = || {
            let (a, b) = value.split_once(',').unwrap();
            (a.parse::<u64>().unwrap(), b.parse::<u64>().unwrap())
        };
        match key {
            "people" => config.nodes.people = u() as usize,
            "boats" => config.nodes.boats = u() as usize,
            "days" => config.duration_s = u() * 86_400,
            "seed" => config.seed = u(),
            "travel_prob" => config.travel_probability = f(),
            "traveler_fraction" => config.traveler_fraction = f(),
            "home" => config.home_dwell_s = pair(),
            "gathering" => config.gathering_dwell_s = pair(),
            "pier" => config.pier_dwell_s = pair(),
            "boarding" => config.boarding_range_s = pair(),
            "capacity" => config.boat_capacity_range = pair(),
            "text_spacing" | "audio_spacing" | "video_spacing" => {
                let class = match key.split_once('_').unwrap().0 {
                    "text" => ContentClass::Text,
                    "audio" => ContentClass::Audio,
                    _ => ContentClass::Video,
                };
                config.workloads.iter_mut().for_each(|w| {
                    if w.content_class == class {
                        w.spacing_s = Some(u());
                    }
                });
            }
            "text_offset" | "audio_offset" | "video_offset" => {
                let class = match key.split_once('_').unwrap().0 {
                    "text" => ContentClass::Text,
                    "audio" => ContentClass::Audio,
                    _ => ContentClass::Video,
                };
                config.workloads.iter_mut().for_each(|w| {
                    if w.content_class == class {
                        w.start_offset_s = Some(u());
                    }
                });
            }
            "text_gen" | "audio_gen" | "video_gen" => {
                let class = match key.split_once('_').unwrap().0 {
                    "text" => ContentClass::Text,
                    "audio" => ContentClass::Audio,
                    _ => ContentClass::Video,
                };
                config.workloads.iter_mut().for_each(|w| {
                    if w.content_class == class {
                        w.generation = u();
                    }
                });
            }
            "text_size" | "audio_size" | "video_size" => {
                let class = match key.split_once('_').unwrap().0 {
                    "text" => ContentClass::Text,
                    "audio" => ContentClass::Audio,
                    _ => ContentClass::Video,
                };
                config.workloads.iter_mut().for_each(|w| {
                    if w.content_class == class {
                        w.bundle_size = u();
                    }
                });
            }
            "ttl" => config.ttl_s = u(),
            "text_ttl" | "audio_ttl" | "video_ttl" => {
                let class = match key.split_once('_').unwrap().0 {
                    "text" => ContentClass::Text,
                    "audio" => ContentClass::Audio,
                    _ => ContentClass::Video,
                };
                config.workloads.iter_mut().for_each(|w| {
                    if w.content_class == class {
                        w.ttl_s = Some(u());
                    }
                });
            }
            "quiet" => quiet = true,
            other => panic!("unknown key {other}"),
        }
    }
    let mut rates = Vec::new();
    for on in [false, true] {
        let mut c = config.clone();
        c.compression.enabled = on;
        let t0 = std::time::Instant::now();
        let m = run(&c).unwrap();
        if !quiet {
            println!("compression={on} elapsed={:.2?}", t0.elapsed());
        }
        for class in ContentClass::ALL {
            let cm = m.class(class);
            if !quiet {
                println!(
                    "  {class:5} created {:4} delivered {:4} rate {:.3} latency {:7.0}s Gbits {:.2}",
                    cm.created,
                    cm.delivered,
                    cm.delivery_ratio(),
                    cm.mean_latency_s(),
                    cm.bits_transmitted as f64 / 1e9,
                );
            }
            rates.push(cm.delivery_ratio());
        }
        let a = m.audit;
        assert!(a.clean(), "audit violated: {a:?}");
        if !quiet {
            println!(
                "  audit: contacts {} completed {} aborted {} util {:.3} copies {}",
                a.contacts, a.transfers_completed, a.transfers_aborted, a.max_utilization,
                m.copies_stored,
            );
        }
    }
    let mut line = format!("seed {} people {:3}:", config.seed, config.nodes.people);
    for (i, class) in ContentClass::ALL.into_iter().enumerate() {
        let (off, on) = (rates[i], rates[i + 3]);
        line += &format!("  {class:5} {:.3} (off {off:.3} on {on:.3})", on / off);
    }
    println!("{line}");
}
