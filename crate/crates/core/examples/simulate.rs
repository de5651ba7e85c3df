//! Simulated users at each expertise level on the sample procedure.

use emaint::session_service::{load_model, simulate_user};
use emaint::user_model::Level;

fn main() {
    let ctx = load_model(include_str!("../fixtures/pump_overhaul.amm")).unwrap();
    for level in Level::ALL {
        let sim = simulate_user(&ctx, level, 1, 40);
        println!(
            "true {level:<8} -> inferred {:<8} tier {:<6} after {} steps, {} tier change(s)",
            sim.final_level,
            sim.final_tier,
            sim.steps.len(),
            sim.tier_changes
        );
    }
    print!("{}", simulate_user(&ctx, Level::Advanced, 3, 8).render());
}
