use std::fmt::Write as _;

use courtpose::model::{Player, Source};
use courtpose::synth::{COURT_LENGTH_M, COURT_WIDTH_M};
use courtpose::tracker::Track;

const PAD: f64 = 20.0;

fn color(player: Player) -> &'static str {
    match player {
        Player::Near => "#1f77b4",
        Player::Far => "#d62728",
    }
}

/// Top-view court with one polyline per track. Segments touching an
/// interpolated point are dashed.
pub fn topview_svg(tracks: &[Track<f64>], px_per_m: f64) -> String {
    let w = COURT_WIDTH_M * px_per_m + 2.0 * PAD;
    let h = COURT_LENGTH_M * px_per_m + 2.0 * PAD;
    // far baseline at the top
    let sx = |x: f64| PAD + x * px_per_m;
    let sy = |y: f64| PAD + (COURT_LENGTH_M - y) * px_per_m;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.2}" height="{h:.2}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(svg, r##"<rect width="{w:.2}" height="{h:.2}" fill="#3a7d44"/>"##);
    let _ = writeln!(
        svg,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="white" stroke-width="2"/>"#,
        sx(0.0),
        sy(COURT_LENGTH_M),
        COURT_WIDTH_M * px_per_m,
        COURT_LENGTH_M * px_per_m
    );
    let net = sy(COURT_LENGTH_M / 2.0);
    let _ = writeln!(
        svg,
        r#"<line x1="{:.2}" y1="{net:.2}" x2="{:.2}" y2="{net:.2}" stroke="white" stroke-width="3"/>"#,
        sx(0.0),
        sx(COURT_WIDTH_M)
    );

    for t in tracks {
        let c = color(t.player);
        let _ = writeln!(svg, r#"<g id="{}" fill="none" stroke="{c}" stroke-width="1.5">"#, t.player);
        let mut run: Vec<String> = Vec::new();
        let mut dashed = false;
        let flush = |svg: &mut String, run: &mut Vec<String>, dashed: bool| {
            if run.len() >= 2 {
                let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
                let _ = writeln!(svg, r#"<polyline points="{}"{dash}/>"#, run.join(" "));
            }
            run.clear();
        };
        for pair in t.points.windows(2) {
            let seg_dashed = pair.iter().any(|p| p.source == Source::Interpolated);
            if seg_dashed != dashed && !run.is_empty() {
                let last = run.last().cloned().expect("nonempty run");
                flush(&mut svg, &mut run, dashed);
                run.push(last);
            }
            dashed = seg_dashed;
            if run.is_empty() {
                run.push(format!("{:.2},{:.2}", sx(pair[0].world.x), sy(pair[0].world.y)));
            }
            run.push(format!("{:.2},{:.2}", sx(pair[1].world.x), sy(pair[1].world.y)));
        }
        flush(&mut svg, &mut run, dashed);
        if let Some(p) = t.points.first() {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, sx(p.world.x), sy(p.world.y));
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}
