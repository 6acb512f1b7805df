//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use guis::agent::{parse_call, parse_reply, Action, CallError, Direction, EpisodeLimits, ReplyError};
use guis::augmentation::{
    augment_pipeline, gaussian_noise, light_mask, op_rng, perspective_jitter, rotate, AugmentConfig, AugmentOp, LightKind,
};
use guis::clients::{ClientError, LlmClient, ScriptedLlm, TableCaptioner};
use guis::geometry::{containment_ratio, homography_from_quad, warp_perspective, BBox, Homography, Point};
use guis::perception::{
    build_document, dbscan, parse_document, render_document, render_outline, Detection, ElementClass, GuiElement,
    ImageSize, Label, PerceptionConfig,
};
use guis::perception::{build_hierarchy, GuiTree};
use guis::raster::Image;
use guis::retrieval::{CaseIndex, TaskCase};
use guis::simulator::{evaluate_taskset, load_tasks, AppGraph, Metrics, TaskSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

const APPS: [&str; 3] = ["news", "shopping", "settings"];

fn load_app(app: &str) -> (AppGraph, Vec<TaskSpec>) {
    let dir = fixtures().join("apps").join(app);
    let graph = AppGraph::from_json(&fs::read_to_string(dir.join("graph.json")).unwrap()).unwrap();
    let tasks = load_tasks(&fs::read_to_string(dir.join("tasks.json")).unwrap()).unwrap();
    (graph, tasks)
}

fn eval_all(mut llm_for: impl FnMut(&str, &TaskSpec) -> Result<Box<dyn LlmClient>, ClientError>) -> Metrics {
    let parts = APPS.iter().map(|app| {
        let (graph, tasks) = load_app(app);
        let mut f = |t: &TaskSpec| llm_for(app, t);
        evaluate_taskset(&graph, &tasks, &mut f, None, EpisodeLimits::default()).unwrap().metrics
    });
    Metrics::combine(parts.collect::<Vec<_>>())
}

fn repeat_script(call: &str, n: usize) -> Result<Box<dyn LlmClient>, ClientError> {
    let reply = format!("Summary: s\nThought: t\nAction: a\nFunction: {call}");
    Ok(Box::new(ScriptedLlm::new(vec![reply; n])?))
}

fn end_to_end() -> Outcome {
    let expected: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixtures().join("apps/expected.json")).unwrap()).unwrap();
    let mean = expected["mean_optimal_steps"].as_f64().unwrap();
    let start = Instant::now();
    let metrics = eval_all(|app, t| {
        let path = fixtures().join(format!("apps/{app}/scripts/{}.txt", t.id));
        Ok(Box::new(ScriptedLlm::from_script(&fs::read_to_string(path).unwrap())?))
    });
    let elapsed = start.elapsed();
    let mut optimal = BTreeMap::new();
    for app in APPS {
        for t in load_app(app).1 {
            optimal.insert(t.id, t.optimal_steps);
        }
    }
    ensure(metrics.tasks.len() == 18, || format!("{} tasks", metrics.tasks.len()))?;
    ensure(metrics.plan_sr == 1.0, || format!("plan_sr {}: {:?}", metrics.plan_sr, metrics.tasks))?;
    for t in &metrics.tasks {
        ensure(t.steps == optimal[&t.id], || format!("{} took {} steps, optimal {}", t.id, t.steps, optimal[&t.id]))?;
    }
    let avg = metrics.avg_steps.unwrap();
    ensure((avg - mean).abs() < 1e-12, || format!("avg_steps {avg} != pinned mean {mean}"))?;
    ensure(elapsed.as_secs_f64() < 5.0, || format!("took {elapsed:?}"))?;
    Ok(format!("plan_sr=1.0 avg_steps={avg:.4} in {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn adversarial() -> Outcome {
    let back = eval_all(|_, _| repeat_script("Back()", 20));
    ensure(back.plan_sr == 0.0, || format!("always-Back plan_sr {}", back.plan_sr))?;
    let limits = EpisodeLimits::default();
    let tap = eval_all(|_, _| repeat_script("Tap(99)", 20));
    ensure(tap.plan_sr == 0.0, || format!("Tap(99) plan_sr {}", tap.plan_sr))?;
    for t in &tap.tasks {
        ensure(t.reason == "repeated_errors", || format!("{}: {}", t.id, t.reason))?;
        ensure(t.steps <= limits.max_consecutive_errors + 3, || format!("{}: {} steps", t.id, t.steps))?;
    }
    Ok(format!("always-Back plan_sr=0.0; Tap(99) loop fails all {} tasks with repeated_errors", tap.tasks.len()))
}

/// Reference DBSCAN: core points joined when within eps (union-find),
/// clusters numbered by their lowest core index, border points join the
/// lowest-numbered cluster among their core neighbors.
fn naive_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |i: usize, j: usize| points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= eps * eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in 0..i {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut number = HashMap::new();
    let mut comp = vec![None; n];
    for i in 0..n {
        if core[i] {
            let root = find(&mut parent, i);
            let next = number.len();
            comp[i] = Some(*number.entry(root).or_insert(next));
        }
    }
    (0..n)
        .map(|i| if core[i] { comp[i] } else { (0..n).filter(|&j| core[j] && near(i, j)).filter_map(|j| comp[j]).min() })
        .collect()
}

/// Same partition up to renaming of clusters.
fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x, y) {
            (None, None) => true,
            (Some(x), Some(y)) => *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x,
            _ => false,
        })
}

fn dbscan_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut clusters_seen = 0;
    for set in 0..100 {
        let n = rng.random_range(1..=200);
        let dim = rng.random_range(1..=3);
        let centers: Vec<Vec<f64>> = (0..rng.random_range(1..6)).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    (0..dim).map(|_| rng.random::<f64>()).collect()
                } else {
                    let c = &centers[rng.random_range(0..centers.len())];
                    c.iter().map(|x| x + rng.random_range(-0.05..0.05)).collect()
                }
            })
            .collect();
        let eps = rng.random_range(0.01..0.12);
        let min_pts = rng.random_range(1..6);
        let ours: Vec<Option<usize>> = dbscan(&points, eps, min_pts).unwrap().into_iter().map(Label::cluster).collect();
        let reference = naive_dbscan(&points, eps, min_pts);
        ensure(same_partition(&ours, &reference), || format!("set {set}: n={n} eps={eps} min_pts={min_pts}"))?;
        clusters_seen += reference.iter().flatten().collect::<BTreeSet<_>>().len();
    }
    Ok(format!("100 sets agree with the reference ({clusters_seen} clusters total)"))
}

fn element(id: usize, bbox: BBox) -> GuiElement {
    GuiElement { id, cls: ElementClass::Button, bbox, content: String::new(), confidence: 0.9, inferred: false }
}

fn random_nested_boxes(rng: &mut ChaCha8Rng, n: usize) -> Vec<BBox> {
    let mut boxes: Vec<BBox> = Vec::new();
    while boxes.len() < n {
        let b = if !boxes.is_empty() && rng.random_bool(0.6) {
            let p = boxes[rng.random_range(0..boxes.len())];
            let (w, h) = (p.width(), p.height());
            let cw = w * rng.random_range(0.2..1.0);
            let ch = h * rng.random_range(0.2..1.0);
            // Occasionally overhang the parent a little.
            let over = if rng.random_bool(0.3) { rng.random_range(0.0..0.2) } else { 0.0 };
            let x = p.x_min + rng.random_range(0.0..=(w - cw)) + over * cw;
            let y = p.y_min + rng.random_range(0.0..=(h - ch));
            BBox::new(x, y, x + cw, y + ch)
        } else if !boxes.is_empty() && rng.random_bool(0.1) {
            Ok(boxes[rng.random_range(0..boxes.len())])
        } else {
            let (x, y) = (rng.random_range(0.0..1000.0), rng.random_range(0.0..2000.0));
            BBox::new(x, y, x + rng.random_range(5.0..500.0), y + rng.random_range(5.0..800.0))
        };
        if let Ok(b) = b {
            if !b.is_degenerate() {
                boxes.push(b);
            }
        }
    }
    boxes
}

fn hierarchy_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut edges = 0;
    for screen in 0..500 {
        let n = rng.random_range(0..=60);
        let elements: Vec<GuiElement> =
            random_nested_boxes(&mut rng, n).into_iter().enumerate().map(|(i, b)| element(i, b)).collect();
        let tree: GuiTree = build_hierarchy(&elements, 0.9);
        // Forest: every element appears exactly once.
        let mut seen = vec![0; n];
        let mut parent: Vec<Option<usize>> = vec![None; n];
        fn visit(node: &guis::perception::GuiNode, seen: &mut [usize], parent: &mut [Option<usize>]) {
            seen[node.element.id] += 1;
            for c in &node.children {
                parent[c.element.id] = Some(node.element.id);
                visit(c, seen, parent);
            }
        }
        for r in &tree.roots {
            visit(r, &mut seen, &mut parent);
        }
        ensure(seen.iter().all(|&c| c == 1), || format!("screen {screen}: not a forest {seen:?}"))?;
        for i in 0..n {
            let e = &elements[i].bbox;
            let candidates: Vec<usize> = (0..n)
                .filter(|&j| j != i && elements[j].bbox.area() > e.area() && containment_ratio(e, &elements[j].bbox) >= 0.9)
                .collect();
            let expected = candidates
                .iter()
                .copied()
                .min_by(|&a, &b| elements[a].bbox.area().total_cmp(&elements[b].bbox.area()).then(a.cmp(&b)));
            ensure(parent[i] == expected, || format!("screen {screen}: element {i} parent {:?}, expected {expected:?}", parent[i]))?;
            if let Some(p) = parent[i] {
                ensure(containment_ratio(e, &elements[p].bbox) >= 0.9, || format!("screen {screen}: weak edge {p}->{i}"))?;
                edges += 1;
            }
        }
    }
    Ok(format!("500 screens, {edges} edges checked exhaustively"))
}

fn xy_cut() -> Outcome {
    use guis::perception::xy_cut_permutation;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for layout in 0..50 {
        let rows = rng.random_range(1..=6);
        let cols = rng.random_range(1..=5);
        let col_gap = rng.random_range(14.0..30.0);
        let row_gap = rng.random_range(col_gap..60.0);
        let widths: Vec<f64> = (0..cols).map(|_| rng.random_range(60.0..180.0)).collect();
        let heights: Vec<f64> = (0..rows).map(|_| rng.random_range(40.0..200.0)).collect();
        let mut cells = Vec::new();
        let mut y = 20.0;
        for (r, h) in heights.iter().enumerate() {
            let mut x = 10.0;
            for (c, w) in widths.iter().enumerate() {
                // Shrink vertically by at most 20% per side so a row stays one band.
                let top = y + h * rng.random_range(0.0..0.2);
                let bottom = y + h - h * rng.random_range(0.0..0.2);
                cells.push(((r, c), BBox::new(x, top, x + w, bottom).unwrap()));
                x += w + col_gap;
            }
            y += h + row_gap;
        }
        cells.shuffle(&mut rng);
        let boxes: Vec<BBox> = cells.iter().map(|(_, b)| *b).collect();
        let keys: Vec<usize> = (0..boxes.len()).collect();
        let got: Vec<(usize, usize)> = xy_cut_permutation(&boxes, &keys).into_iter().map(|i| cells[i].0).collect();
        let mut want: Vec<(usize, usize)> = cells.iter().map(|(rc, _)| *rc).collect();
        want.sort();
        ensure(got == want, || format!("layout {layout} ({rows}x{cols}): {got:?}"))?;
    }
    for case in 0..500 {
        let n = rng.random_range(0..40);
        let boxes: Vec<BBox> = (0..n)
            .map(|_| {
                let (x, y) = (rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0));
                BBox::new(x, y, x + rng.random_range(0.0..300.0), y + rng.random_range(0.0..300.0)).unwrap()
            })
            .collect();
        let keys: Vec<usize> = (0..n).collect();
        let mut perm = xy_cut_permutation(&boxes, &keys);
        perm.sort();
        ensure(perm == keys, || format!("arbitrary input {case} is not permuted"))?;
    }
    Ok("50 grids in row-major order; 500 arbitrary inputs permuted".into())
}

fn random_quad(rng: &mut ChaCha8Rng) -> [Point; 4] {
    loop {
        let (x0, y0) = (rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0));
        let (w, h) = (rng.random_range(20.0..2000.0), rng.random_range(20.0..2000.0));
        let mut j = || rng.random_range(-0.3..0.3);
        let q = [
            Point::new(x0 + j() * w, y0 + j() * h),
            Point::new(x0 + w + j() * w, y0 + j() * h),
            Point::new(x0 + w + j() * w, y0 + h + j() * h),
            Point::new(x0 + j() * w, y0 + h + j() * h),
        ];
        let tri = |a: Point, b: Point, c: Point| ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs() / 2.0;
        let min_area = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
            .iter()
            .map(|&(a, b, c)| tri(q[a], q[b], q[c]))
            .fold(f64::INFINITY, f64::min);
        if min_area > 0.01 * w * h {
            return q;
        }
    }
}

fn homography() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (src, dst) = (random_quad(&mut rng), random_quad(&mut rng));
        let h = homography_from_quad(&src, &dst).map_err(|e| e.to_string())?;
        for (s, d) in src.iter().zip(&dst) {
            let p = h.apply(*s).ok_or("corner mapped to infinity")?;
            worst = worst.max(p.distance(*d));
        }
    }
    ensure(worst <= 1e-6, || format!("worst reprojection error {worst:e}"))?;
    let img = Image::from_fn(37, 23, |x, y| [(x * 7) as u8, (y * 11) as u8, ((x * y) % 256) as u8]);
    let warped = warp_perspective(&img, &Homography::identity(), 37, 23).unwrap();
    ensure(warped == img, || "identity warp changed pixels".into())?;
    Ok(format!("1000 quads, worst corner error {worst:.1e}; identity warp byte-identical"))
}

fn photo_like() -> Image {
    Image::from_fn(64, 64, |x, y| {
        let v = ((x as f64 / 9.0).sin() * 60.0 + (y as f64 / 5.0).cos() * 40.0 + 128.0) as u8;
        [v, v.wrapping_add((x * 3) as u8), 255 - v]
    })
}

fn augmentation() -> Outcome {
    let img = photo_like();
    let cfg = AugmentConfig { seed: 2024, ..Default::default() };
    let a = augment_pipeline(&img, &cfg).unwrap().encode_png().unwrap();
    let b = augment_pipeline(&img, &cfg).unwrap().encode_png().unwrap();
    ensure(a == b, || "same seed gave different PNG bytes".into())?;
    let other = augment_pipeline(&img, &AugmentConfig { seed: 2025, ..Default::default() }).unwrap().encode_png().unwrap();
    ensure(a != other, || "different seeds gave identical output".into())?;

    let mut rng = op_rng(1, 0, AugmentOp::Noise);
    for kind in [LightKind::Linear { angle_deg: 30.0 }, LightKind::Radial] {
        ensure(light_mask(&img, 0.0, kind, Point::new(0.3, 0.6)).unwrap() == img, || "light strength 0".into())?;
    }
    ensure(gaussian_noise(&img, 0.0, &mut rng) == img, || "noise sigma 0".into())?;
    ensure(rotate(&img, 0.0).unwrap() == img, || "rotation 0".into())?;
    ensure(perspective_jitter(&img, 0.0, &mut rng).unwrap().0 == img, || "jitter 0".into())?;
    let none = AugmentConfig { ops: vec![], ..cfg.clone() };
    ensure(augment_pipeline(&img, &none).unwrap() == img, || "no ops enabled".into())?;
    let zero = AugmentConfig {
        light_strength_range: [0.0, 0.0],
        noise_sigma_range: [0.0, 0.0],
        rotation_range: [0.0, 0.0],
        perspective_jitter: 0.0,
        ..cfg
    };
    ensure(augment_pipeline(&img, &zero).unwrap() == img, || "all-zero ranges".into())?;

    let white = Image::filled(2, 1, [255; 3]);
    let lit = light_mask(&white, -0.4, LightKind::Linear { angle_deg: 0.0 }, Point::new(0.0, 0.5)).unwrap();
    let pair = (lit.pixel(0, 0)[0], lit.pixel(1, 0)[0]);
    ensure(pair == (255, 153), || format!("light mask gave {pair:?}"))?;
    Ok("same seed byte-identical, zero parameters are identities, light mask (255, 153)".into())
}

fn parser_corpus() -> Outcome {
    use Action::*;
    let positive: Vec<(&str, Action)> = vec![
        ("Tap(12)", Tap(12)),
        ("Tap(0)", Tap(0)),
        ("  Tap( 7 )  ", Tap(7)),
        ("Tap(007)", Tap(7)),
        ("Long_press(3)", LongPress(3)),
        ("Long_press(\t41\t)", LongPress(41)),
        ("Text(\"hello\")", Text("hello".into())),
        ("Text(\"\")", Text(String::new())),
        ("Text(\"a, b)\")", Text("a, b)".into())),
        (r#"Text("say \"hi\"")"#, Text("say \"hi\"".into())),
        (r#"Text("back\\slash")"#, Text("back\\slash".into())),
        (r#"Text("line\nbreak")"#, Text("line\nbreak".into())),
        ("Text(\"héllo wörld\")", Text("héllo wörld".into())),
        ("Text( \"padded\" )", Text("padded".into())),
        ("Scroll(\"up\")", Scroll(Direction::Up)),
        ("Scroll(\"down\")", Scroll(Direction::Down)),
        ("Scroll(\"left\")", Scroll(Direction::Left)),
        ("Scroll(\"right\")", Scroll(Direction::Right)),
        ("Back()", Back),
        ("Back( )", Back),
        ("Finish()", Finish),
        ("\nFinish()\n", Finish),
    ];
    #[derive(Debug, PartialEq)]
    enum Kind {
        Unknown,
        Arity,
        Argument,
        Malformed,
    }
    let negative: Vec<(&str, Kind)> = vec![
        ("Scroll(\"diagonal\")", Kind::Argument),
        ("Scroll(up)", Kind::Argument),
        ("Scroll(\"UP\")", Kind::Argument),
        ("Tap(-1)", Kind::Argument),
        ("Tap(1.5)", Kind::Argument),
        ("Tap(\"3\")", Kind::Argument),
        ("Tap(x)", Kind::Argument),
        ("Tap(99999999999999999999999)", Kind::Argument),
        ("Text(hello)", Kind::Argument),
        (r#"Text("bad \q escape")"#, Kind::Argument),
        ("Text(\"a\" \"b\")", Kind::Argument),
        ("Tap(1, 2)", Kind::Arity),
        ("Tap()", Kind::Arity),
        ("Back(1)", Kind::Arity),
        ("Finish(\"now\")", Kind::Arity),
        ("Scroll()", Kind::Arity),
        ("tap(1)", Kind::Unknown),
        ("Swipe(1)", Kind::Unknown),
        ("LongPress(2)", Kind::Unknown),
        ("long_press(2)", Kind::Unknown),
        ("Tap", Kind::Malformed),
        ("Tap(3", Kind::Malformed),
        ("Text(\"unterminated)", Kind::Malformed),
        ("", Kind::Malformed),
        ("Tap(1,)", Kind::Malformed),
    ];
    for (text, want) in &positive {
        let got = parse_call(text);
        ensure(got.as_ref() == Ok(want), || format!("{text:?} -> {got:?}, want {want:?}"))?;
        ensure(parse_call(&want.to_string()).as_ref() == Ok(want), || format!("{want:?} does not round-trip"))?;
    }
    for (text, want) in &negative {
        let kind = match parse_call(text) {
            Ok(a) => return Err(format!("{text:?} accepted as {a:?}")),
            Err(CallError::UnknownFunction(_)) => Kind::Unknown,
            Err(CallError::BadArity(_)) => Kind::Arity,
            Err(CallError::BadArgument(_)) => Kind::Argument,
            Err(CallError::Malformed(_)) => Kind::Malformed,
        };
        ensure(&kind == want, || format!("{text:?} -> {kind:?}, want {want:?}"))?;
    }
    let reply = "Summary: s\nThought: t\nAction: a\nFunction: Tap(3) // tap the search icon";
    ensure(parse_reply(reply).map(|r| r.action) == Ok(Tap(3)), || "trailing comment".into())?;
    ensure(
        parse_reply("Summary: s\nAction: a\nFunction: Back()") == Err(ReplyError::MissingSection("Thought")),
        || "missing Thought".into(),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let alphabet: Vec<char> = "TapLongrsTextScrolBackFinish_()\"\\,: \n\t0123456789updownleftright/SummaryThoughtActionFunction€ß"
        .chars()
        .collect();
    let mut accepted = 0;
    for i in 0..10_000 {
        let len = rng.random_range(0..80);
        let mut s: String = if i % 4 == 1 {
            // A valid call with one character replaced.
            let mut chars: Vec<char> = positive[rng.random_range(0..positive.len())].0.chars().collect();
            let at = rng.random_range(0..chars.len());
            chars[at] = alphabet[rng.random_range(0..alphabet.len())];
            chars.into_iter().collect()
        } else {
            (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
        };
        if i % 2 == 0 {
            s = format!("Summary: x\nThought: y\nAction: z\nFunction: {s}");
        }
        let bytes: Vec<u8> = s.bytes().map(|b| if rng.random_bool(0.01) { rng.random() } else { b }).collect();
        let s = String::from_utf8_lossy(&bytes);
        let result = panic::catch_unwind(|| (parse_call(&s).is_ok(), parse_reply(&s).is_ok()));
        let (call_ok, reply_ok) = result.map_err(|_| format!("panic on {s:?}"))?;
        accepted += usize::from(call_ok) + usize::from(reply_ok);
    }
    Ok(format!("{} positive, {} negative classified; 10000 fuzz inputs, {accepted} accepted, no panic", positive.len(), negative.len()))
}

const CLASSES: [&str; 11] =
    ["Text", "Icon", "Image", "Button", "CheckBox", "EditText", "Modal", "Drawer", "PageIndicator", "Switch", "Other"];

fn random_content(rng: &mut ChaCha8Rng) -> String {
    let pieces = ["Save", "a < b", "R&D", "\"quoted\"", "two\nlines", "tab\there", "ünï", "x > y", "  ", "", "100%"];
    (0..rng.random_range(0..3)).map(|_| pieces[rng.random_range(0..pieces.len())]).collect::<Vec<_>>().join(" ")
}

fn document_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut nodes = 0;
    let mut nested = 0;
    for doc_i in 0..200 {
        let n = rng.random_range(0..40);
        let dets: Vec<Detection> = random_nested_boxes(&mut rng, n)
            .into_iter()
            .map(|b| {
                let cls = CLASSES[rng.random_range(0..CLASSES.len())];
                let text = random_content(&mut rng);
                Detection::new(cls, b.clip(1080.0, 2400.0), rng.random_range(0.3..1.0), Some(&text))
            })
            .filter(|d| !d.bbox.is_degenerate())
            .collect();
        let report = build_document(&dets, ImageSize::new(1080, 2400), &TableCaptioner::default(), &PerceptionConfig::default())
            .map_err(|e| format!("doc {doc_i}: {e}"))?;
        let doc = report.document;
        let text = render_document(&doc);
        let parsed = parse_document(&text).map_err(|e| format!("doc {doc_i}: {e}\n{text}"))?;
        ensure(parsed == doc.outline(), || format!("doc {doc_i} changed in round trip:\n{text}"))?;
        ensure(render_outline(&parsed) == text, || format!("doc {doc_i}: re-render differs"))?;
        nodes += doc.len();
        nested += doc.tree.walk().filter(|(d, _)| *d > 0).count();
    }
    let mut goldens = 0;
    for name in ["empty", "news_home", "settings_main", "dialog", "gallery"] {
        let dir = fixtures().join("screens");
        let file = guis::perception::DetectionFile::from_json(&fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap();
        let captions = dir.join(format!("{name}.captions.json"));
        let captioner = if captions.exists() {
            TableCaptioner::from_json(&fs::read_to_string(captions).unwrap()).unwrap()
        } else {
            TableCaptioner::default()
        };
        let doc = build_document(&file.elements, file.image, &captioner, &PerceptionConfig::default()).unwrap().document;
        let golden = fs::read_to_string(dir.join(format!("{name}.golden"))).unwrap();
        ensure(render_document(&doc) == golden, || format!("golden {name} differs"))?;
        goldens += 1;
    }
    Ok(format!("200 documents ({nodes} nodes, {nested} nested) round-trip; {goldens} goldens byte-equal"))
}

fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Dense TF-IDF cosine similarities of `query` against every task.
fn oracle_similarities(tasks: &[String], query: &str) -> Vec<f64> {
    let docs: Vec<Vec<String>> = tasks.iter().map(|t| oracle_tokens(t)).collect();
    let vocab: BTreeSet<&String> = docs.iter().flatten().collect();
    let vocab: Vec<&String> = vocab.into_iter().collect();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|w| {
            let df = docs.iter().filter(|d| d.contains(w)).count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    let vec_of = |toks: &[String]| -> Vec<f64> {
        vocab.iter().zip(&idf).map(|(w, idf)| toks.iter().filter(|t| t == w).count() as f64 * idf).collect()
    };
    let q = vec_of(&oracle_tokens(query));
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    docs.iter()
        .map(|d| {
            let v = vec_of(d);
            let (nv, nq) = (norm(&v), norm(&q));
            if nv == 0.0 || nq == 0.0 {
                0.0
            } else {
                v.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() / (nv * nq)
            }
        })
        .collect()
}

fn retrieval() -> Outcome {
    let words = [
        "open", "search", "news", "about", "sports", "weather", "turn", "on", "wifi", "settings", "cart", "add", "the", "font",
        "size", "Dark", "MODE", "follow", "team",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut queries = 0;
    for corpus in 0..50 {
        let n = rng.random_range(1..30);
        let tasks: Vec<String> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..7);
                let t: Vec<&str> = (0..len).map(|_| words[rng.random_range(0..words.len())]).collect();
                t.join(if rng.random_bool(0.5) { " " } else { ", " })
            })
            .collect();
        let cases: Vec<TaskCase> = tasks.iter().map(|t| TaskCase::new("app", t, &["Back()"])).collect();
        let index = CaseIndex::build(cases).unwrap();
        for q in 0..5 {
            let query = if q == 0 {
                tasks[rng.random_range(0..n)].clone()
            } else {
                (0..rng.random_range(0..5)).map(|_| words[rng.random_range(0..words.len())]).collect::<Vec<_>>().join(" ")
            };
            let sims = oracle_similarities(&tasks, &query);
            let mut want: Vec<usize> = (0..n).collect();
            want.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
            let got = index.query(&query, n);
            ensure(got.len() == n, || format!("corpus {corpus}: {} hits", got.len()))?;
            for (rank, (h, &w)) in got.iter().zip(&want).enumerate() {
                ensure((h.similarity - sims[h.index]).abs() < 1e-9, || {
                    format!("corpus {corpus} {query:?}: similarity of case {} is {} not {}", h.index, h.similarity, sims[h.index])
                })?;
                ensure(h.index == w || (sims[h.index] - sims[w]).abs() < 1e-9, || {
                    format!("corpus {corpus} {query:?}: rank {rank} is case {}, oracle has {w}", h.index)
                })?;
            }
            queries += 1;
        }
        for (i, t) in tasks.iter().enumerate() {
            let top = index.query(t, 1);
            ensure((top[0].similarity - 1.0).abs() < 1e-12, || format!("corpus {corpus}: self-retrieval of case {i} is {}", top[0].similarity))?;
        }
    }
    Ok(format!("50 corpora, {queries} queries match the dense oracle; self-retrieval similarity 1.0"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("offline end-to-end on the toy apps", end_to_end),
        ("adversarial scripts", adversarial),
        ("DBSCAN matches naive reference", dbscan_oracle),
        ("hierarchy invariants under fuzzing", hierarchy_fuzz),
        ("XY-cut reading order", xy_cut),
        ("homography reprojection and identity warp", homography),
        ("augmentation determinism and identities", augmentation),
        ("reply/call parser corpus and fuzz", parser_corpus),
        ("document round-trip and goldens", document_round_trip),
        ("retrieval matches cosine oracle", retrieval),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
