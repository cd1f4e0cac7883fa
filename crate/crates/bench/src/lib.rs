//! Synthetic inputs shared by the benchmarks.

use provoscope_core::dataset::Dataset;

const GENRES: [&str; 6] = ["Comedy", "Family", "Horror", "Action", "Drama", "Animation"];
const CERTS: [&str; 4] = ["G", "PG", "PG-13", "R"];

/// A movie table with `rows` rows. Deterministic, no RNG needed.
pub fn movies_csv(rows: usize) -> Vec<u8> {
    let mut out = String::from("title,year,genre,certification,rating,runtime_minutes,box_office_musd\n");
    for i in 0..rows {
        let rating = if i % 37 == 0 { String::new() } else { format!("{}.{}", 1 + i % 9, i % 10) };
        out.push_str(&format!(
            "Film {i},{},{},{},{rating},{},{}.{}\n",
            1970 + i % 54,
            GENRES[i % GENRES.len()],
            CERTS[(i / 3) % CERTS.len()],
            75 + (i * 7) % 85,
            (i * 13) % 300,
            i % 10,
        ));
    }
    out.into_bytes()
}

pub fn movies(rows: usize) -> Dataset {
    provoscope_core::load_csv(&movies_csv(rows), "movies.csv").expect("synthetic table is valid")
}
