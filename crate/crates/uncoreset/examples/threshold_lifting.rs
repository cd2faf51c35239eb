//! How threshold counting becomes point counting: consecutive-location
//! windows in 3D for intervals, and tight orthants with disjoint box covers
//! for rectangles.

use uncoreset::datasets;
use uncoreset::exact::{rat, rat_int};
use uncoreset::lifting::{
    disjoint_boxes, lift_boxes, lift_rc_1d, lift_rc_query_1d, rc_count_via_boxes, tight_apexes,
};
use uncoreset::model::UncertainPoint;
use uncoreset::queries::rc_fraction;
use uncoreset::ranges::Range;

fn main() {
    // one point, four sorted locations, threshold 2
    let p = UncertainPoint::new(
        1,
        vec![vec![rat_int(1)], vec![rat_int(3)], vec![rat_int(5)], vec![rat_int(7)]],
    );
    println!("locations 1, 3, 5, 7 lifted at threshold 2:");
    for l in lift_rc_1d(&p, 2).unwrap() {
        println!("  window -> ({}, {}, {})", l.coords[0], l.coords[1], l.coords[2]);
    }
    let query = lift_rc_query_1d(rat_int(2), rat_int(6)).unwrap();
    let hits = lift_rc_1d(&p, 2)
        .unwrap()
        .iter()
        .filter(|l| query.contains_ext(&l.coords).unwrap())
        .count();
    println!("window query for [2, 6]: {hits} lifted point inside (= at least 2 locations in range)");

    // the same point's tight orthants after coordinate doubling
    let apexes = tight_apexes(&p, 2).unwrap();
    println!("\ntight orthant apexes at threshold 2 (doubled coordinates):");
    for a in &apexes.apexes {
        println!("  ({}, {})", a[0], a[1]);
    }
    let boxes = disjoint_boxes(&apexes);
    println!("disjoint box cover of their dominance region:");
    for (_, corner) in lift_boxes(&boxes) {
        let parts: Vec<String> = corner.iter().map(ToString::to_string).collect();
        println!("  corners ({})", parts.join(", "));
    }

    // end to end on a plane instance: stabbing equals the direct count
    let set = datasets::random_uniform(12, 3, 2, 30);
    let r = Range::rect(vec![(rat_int(40), rat_int(200)), (rat_int(10), rat_int(150))]).unwrap();
    for t in 1..=set.k() {
        let stabbed = rc_count_via_boxes(&set, &r, t).unwrap();
        let direct = rc_fraction(&set, &r, &rat(t as i64, set.k() as i64)).unwrap();
        println!(
            "threshold {t}/{}: {stabbed} points by box stabbing, {} by definition",
            set.k(),
            direct * rat_int(set.len() as i64)
        );
    }
}
