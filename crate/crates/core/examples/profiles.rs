//! Prints the calibrated built-in profiles.

use mmchan::profiles::{builtin_profiles, model_quartiles, builtin_target, Parameter};

fn main() -> mmchan::Result<()> {
    for (id, profile) in builtin_profiles()? {
        println!("{id}");
        for p in Parameter::ALL {
            let spec = profile.spec(p);
            let q = model_quartiles(spec, profile.transform(p));
            let t = builtin_target(*id, p).expect("target");
            println!(
                "  {:<20} {:<48} residual {:.4}  quartiles {:.3e} {:.3e} {:.3e}  target {:.3e} {:.3e} {:.3e}",
                p.as_str(),
                spec.to_string(),
                profile.residuals[&p],
                q[0], q[1], q[2], t.q1, t.q2, t.q3
            );
        }
    }
    Ok(())
}
