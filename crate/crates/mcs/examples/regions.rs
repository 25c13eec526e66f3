//! Target regions: construction, membership, depth, and the plain-text spec.
//!
//! A target region is the subset of response space a selected point should
//! land in. Every region answers three questions: is `y` inside, how deep
//! inside (distance to the complement), and where is a canonical boundary
//! point — the stand-in response used for test points whose `y` is unknown.
//!
//! ```bash
//! cargo run --example regions
//! ```

use mcs::region::{Norm, TargetRegion};
use mcs::Result;

fn main() -> Result<()> {
    let regions = vec![
        ("all components above their cutoffs", TargetRegion::orthant(vec![1.0, -0.5])?),
        ("within 1.5 of the origin", TargetRegion::ball(vec![0.0, 0.0], 1.5)?),
        ("at least 1.5 from the origin", TargetRegion::ball_complement(vec![0.0, 0.0], 1.5)?),
        ("some component below its cutoff", TargetRegion::orthant_complement(vec![1.0, -0.5])?),
    ];
    let probes: [&[f64]; 3] = [&[2.0, 0.0], &[1.0, -0.5], &[-1.0, -1.0]];

    for (what, region) in &regions {
        println!("{} ({what})", region.kind_name());
        println!("  spec:\n{}", indent(&region.to_spec()));
        let b = region.boundary_point();
        println!(
            "  boundary point {b:?} is inside: {}, interior: {}",
            region.contains(&b)?,
            region.interior(&b)?
        );
        for y in probes {
            println!(
                "  y = {y:?}: inside {}, depth {:.3}",
                region.contains(y)?,
                region.dist_to_complement(y, Norm::L2)?
            );
        }
        println!();
    }

    // Orthant depth under different norms: the L1/L2/Linf distances to the
    // complement coincide because leaving an orthant is a one-coordinate move.
    let orthant = TargetRegion::orthant(vec![0.0, 0.0])?;
    let y = [2.0, 3.0];
    for norm in [Norm::L1, Norm::L2, Norm::LInf] {
        println!("orthant depth of {y:?} under {norm:?}: {}", orthant.dist_to_complement(&y, norm)?);
    }

    // Specs round-trip through text, so regions can live in files.
    let text = regions[1].1.to_spec();
    assert_eq!(TargetRegion::parse_spec(&text)?, regions[1].1);
    println!("\nspec text round-trips");
    Ok(())
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("    {l}")).collect::<Vec<_>>().join("\n")
}
