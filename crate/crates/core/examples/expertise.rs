//! Feed observations to the expertise model and watch the tier follow.

use emaint::user_model::{bucket_time, Observation, UserModelConfig, UserState};

fn main() {
    let cfg = UserModelConfig::default();
    let mut user = UserState::new(cfg.prior);
    println!("start: level {} tier {}", user.level(), user.current_tier);

    // a quick, independent worker on 60 s steps
    for (i, secs) in [30.0, 25.0, 40.0, 28.0, 35.0, 31.0].into_iter().enumerate() {
        let obs = Observation {
            leaf_id: format!("step{i}"),
            help_requested: false,
            time_bucket: bucket_time(secs, 60.0, &cfg),
        };
        let switched = user.update(obs, &cfg).unwrap();
        let p: Vec<String> = user.posterior.iter().map(|x| format!("{x:.3}")).collect();
        print!("{secs:>4}s -> [{}] {}", p.join(" "), user.level());
        match switched {
            Some(sw) => println!("  tier {} -> {}", sw.from, sw.to),
            None => println!(),
        }
    }
}
