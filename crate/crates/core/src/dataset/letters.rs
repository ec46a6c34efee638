//! Block letters rendered as 28x28 glyphs, for out-of-distribution scenes.

use super::mnist::{DigitGlyph, SourceSplit};

const FONT: &[(char, [&str; 7])] = &[
    ('A', [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('B', ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."]),
    ('C', [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    ('E', ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('F', ["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    ('H', ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('K', ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    ('L', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('P', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('R', ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('T', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('X', ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    ('Y', ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    ('Z', ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"]),
];

/// Letters available from [`letter_glyph`].
pub fn available_letters() -> impl Iterator<Item = char> {
    FONT.iter().map(|(c, _)| *c)
}

/// 28x28 glyph of a block letter, 3 px per font cell with softened edges,
/// centered like an MNIST digit. The label is the ASCII code.
pub fn letter_glyph(letter: char) -> Option<DigitGlyph> {
    let letter = letter.to_ascii_uppercase();
    let (_, rows) = FONT.iter().find(|(c, _)| *c == letter)?;
    let mut hard = [[0.0f64; 28]; 28];
    for (r, line) in rows.iter().enumerate() {
        for (c, cell) in line.bytes().enumerate() {
            if cell == b'#' {
                for dy in 0..3 {
                    for dx in 0..3 {
                        hard[4 + 3 * r + dy][7 + 3 * c + dx] = 1.0;
                    }
                }
            }
        }
    }
    // 3x3 blur with weight 4 on the center, clipped to [0, 1]
    let mut bitmap = Vec::with_capacity(28 * 28);
    for r in 0..28usize {
        for c in 0..28usize {
            let mut acc = 3.0 * hard[r][c];
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (y, x) = (r as isize + dy, c as isize + dx);
                    if (0..28).contains(&y) && (0..28).contains(&x) {
                        acc += hard[y as usize][x as usize];
                    }
                }
            }
            bitmap.push((acc / 8.0).min(1.0));
        }
    }
    DigitGlyph::new(SourceSplit::External, letter as u32, letter as u8, 28, 28, bitmap).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letters_render() {
        for l in available_letters() {
            let g = letter_glyph(l).unwrap();
            assert_eq!(g.label, l as u8);
            assert!(g.bitmap.iter().any(|&v| v == 1.0));
            assert!(g.bitmap.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert!(letter_glyph('a').is_some());
        assert!(letter_glyph('?').is_none());
    }
}
