//! Step-by-step decoding of a hand-built contention graph: four users,
//! three slots, capture inside slots and interference cancellation across
//! them.
//!
//! cargo run --example peeling_toy

use frameless::simulator::{ContentionGraph, Receiver};
use frameless::ChannelParams;

fn show(graph: &ContentionGraph) {
    for j in 0..graph.slot_count() {
        let left: Vec<_> = graph.residual(j).iter().map(|t| format!("u{}", t.user)).collect();
        println!(
            "  slot {j}: degree {} residual [{}]",
            graph.slot_degree(j),
            left.join(", ")
        );
    }
    println!("  resolved: {:?}", graph.resolved_users());
}

fn main() -> frameless::Result<()> {
    let receiver = Receiver::Capture(ChannelParams::new(1.0, 10.0)?);
    // Users 0 and 1 collide without capture. User 3 is strong enough to be
    // captured over user 1 in the second slot, which frees user 1 and then
    // user 0 back in the first slot. User 2 stays below the noise floor.
    let mut graph = ContentionGraph::from_user_snrs(vec![2.0, 2.5, 0.5, 12.0]);

    for users in [&[0, 1][..], &[1, 3], &[2, 3]] {
        graph.push_slot(users);
        let new = graph.sic_peel(&receiver);
        println!("after slot {} ({new} newly resolved):", graph.slot_count());
        show(&graph);
    }

    // The collision receiver only decodes singletons.
    let mut plain = ContentionGraph::from_user_snrs(vec![1.0; 4]);
    for users in [&[0, 1][..], &[0, 2, 3], &[2, 3], &[1]] {
        plain.push_slot(users);
    }
    plain.sic_peel(&Receiver::Collision);
    println!("collision receiver with an extra singleton slot:");
    show(&plain);
    Ok(())
}
