use chrono::{Duration, NaiveDate};
use irradcast::ingest::{self, CloudUnit, ColumnMap};
use irradcast::{Error, HourlySeries, Quality, SiteLocation};

const STATION: &str = "722780,\"PHOENIX SKY HARBOR INTL AP\",AZ,-7.0,33.450,-111.983,337";
const COLUMNS: &str = "Date (MM/DD/YYYY),Time (HH:MM),ETR (W/m^2),ETRN (W/m^2),GHI (W/m^2),GHI source,GHI uncert (%),TotCld (tenths),TotCld source";

/// A TMY3 file with `rows` data rows. `cell` supplies (GHI, TotCld) for a row.
fn tmy3(rows: usize, cell: impl Fn(usize) -> (String, String)) -> String {
    let mut out = format!("{STATION}\n{COLUMNS}\n");
    for i in 0..rows {
        // Months drawn from different years, as in real files.
        let year = if (i / 24) % 60 < 30 { 1991 } else { 2005 };
        let day = NaiveDate::from_ymd_opt(2001, 1, 1).unwrap() + Duration::days((i / 24) as i64);
        let (ghi, cld) = cell(i);
        out.push_str(&format!(
            "{:02}/{:02}/{year},{:02}:00,0,0,{ghi},1,8,{cld},E\n",
            day.format("%m"),
            day.format("%d"),
            i % 24 + 1
        ));
    }
    out
}

fn plain(i: usize) -> (String, String) {
    let h = i % 24;
    let ghi = if (7..18).contains(&h) { 100 * (h - 6) } else { 0 };
    (ghi.to_string(), ((i / 24) % 11).to_string())
}

#[test]
fn well_formed_file_gives_8760_records() {
    let s = ingest::parse_tmy3(tmy3(8760, plain).as_bytes()).unwrap();
    assert_eq!(s.len(), 8760);
    assert_eq!(s.site().latitude, 33.45);
    assert_eq!(s.site().utc_offset, -7.0);
    let first = s.timestamp(0);
    assert_eq!(first.format("%m-%d %H:%M").to_string(), "01-01 00:00");
    assert_eq!(s.timestamp(8759), first + Duration::hours(8759));
    assert!(s.records().iter().all(|r| r.quality == Quality::Observed));
}

#[test]
fn sky_cover_in_tenths() {
    let s = ingest::parse_tmy3(tmy3(8760, |i| ("0".into(), if i == 5 { "7" } else { "0" }.into())).as_bytes())
        .unwrap();
    assert_eq!(s.cloud_cover(5), Some(0.7));
    assert_eq!(s.cloud_cover(6), Some(0.0));
}

#[test]
fn sentinel_is_missing() {
    let text = tmy3(8760, |i| (if i == 100 { "-9900" } else { "250" }.into(), "3".into()));
    let s = ingest::parse_tmy3(text.as_bytes()).unwrap();
    assert_eq!(s.irradiance(100), None);
    assert_eq!(s.records()[100].quality, Quality::Invalid);
    assert_eq!(s.irradiance(101), Some(250.0));

    let prepared = ingest::prepare(&s);
    assert_eq!(prepared.irradiance(100), Some(250.0));
    assert_eq!(prepared.records()[100].quality, Quality::Imputed);
}

#[test]
fn malformed_header_cites_line() {
    let text = tmy3(8760, plain).replacen("33.450", "north", 1);
    match ingest::parse_tmy3(text.as_bytes()) {
        Err(Error::Parse { line: 1, message }) => assert!(message.contains("latitude")),
        other => panic!("{other:?}"),
    }
    let text = tmy3(8760, plain).replace("TotCld (tenths)", "Cloudiness");
    assert!(matches!(ingest::parse_tmy3(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn corrupt_data_row_cites_line() {
    let mut lines: Vec<String> = tmy3(8760, plain).lines().map(str::to_string).collect();
    lines[41] = lines[41].replacen("/", "-", 2);
    let text = lines.join("\n");
    match ingest::parse_tmy3(text.as_bytes()) {
        Err(e @ Error::Parse { line: 42, .. }) => assert!(e.to_string().starts_with("line 42:")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn wrong_row_count_is_structural() {
    assert!(matches!(
        ingest::parse_tmy3(tmy3(8759, plain).as_bytes()),
        Err(Error::Structural(_))
    ));
    assert!(matches!(ingest::parse_tmy3("".as_bytes()), Err(Error::Parse { line: 1, .. })));
}

fn generic(rows: &[(&str, &str, &str)]) -> String {
    let mut out = String::from("when,ghi,sky\n");
    for (t, i, c) in rows {
        out.push_str(&format!("{t},{i},{c}\n"));
    }
    out
}

#[test]
fn generic_csv_units_and_order() {
    let map = ColumnMap::new("when", "ghi", "sky", CloudUnit::Oktas);
    let rows = [
        ("2013-05-01 10:00", "500", "4"),
        ("2013-05-01 11:00", "520", "0"),
        ("2013-05-01 12:00", "530", "8"),
    ];
    let sorted = ingest::parse_generic_csv(generic(&rows).as_bytes(), &map, SiteLocation::phoenix()).unwrap();
    assert_eq!(sorted.cloud_cover(0), Some(0.5));
    assert_eq!(sorted.cloud_cover(2), Some(1.0));

    let shuffled = [rows[2], rows[0], rows[1]];
    let again = ingest::parse_generic_csv(generic(&shuffled).as_bytes(), &map, SiteLocation::phoenix()).unwrap();
    assert_eq!(again, sorted);

    let fraction = ColumnMap::new("when", "ghi", "sky", CloudUnit::Fraction);
    let s = ingest::parse_generic_csv(
        generic(&[("2013-05-01 10:00", "500", "0.3")]).as_bytes(),
        &fraction,
        SiteLocation::phoenix(),
    )
    .unwrap();
    assert_eq!(s.cloud_cover(0), Some(0.3));
}

#[test]
fn generic_csv_fills_absent_hours_and_rejects_duplicates() {
    let map = ColumnMap::new("when", "ghi", "sky", CloudUnit::Fraction);
    let s = ingest::parse_generic_csv(
        generic(&[("2013-05-01 10:00", "400", "0.1"), ("2013-05-01 12:00", "500", "0.1")]).as_bytes(),
        &map,
        SiteLocation::phoenix(),
    )
    .unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(s.irradiance(1), None);
    assert_eq!(ingest::prepare(&s).irradiance(1), Some(450.0));

    let dup = generic(&[("2013-05-01 10:00", "400", "0.1"), ("2013-05-01 10:00", "500", "0.1")]);
    assert!(matches!(
        ingest::parse_generic_csv(dup.as_bytes(), &map, SiteLocation::phoenix()),
        Err(Error::DuplicateTimestamps(v)) if v.len() == 1
    ));

    let bad = generic(&[("2013-05-01 10:00", "400", "0.1"), ("yesterday", "500", "0.1")]);
    assert!(matches!(
        ingest::parse_generic_csv(bad.as_bytes(), &map, SiteLocation::phoenix()),
        Err(Error::Parse { line: 3, .. })
    ));
}

#[test]
fn canonical_round_trip_after_tmy3() {
    let s = ingest::prepare(&ingest::parse_tmy3(tmy3(8760, plain).as_bytes()).unwrap());
    let mut buf = Vec::new();
    s.write_canonical(&mut buf).unwrap();
    let back = HourlySeries::read_canonical(buf.as_slice(), *s.site()).unwrap();
    let mut again = Vec::new();
    back.write_canonical(&mut again).unwrap();
    assert_eq!(buf, again);
    assert_eq!(back.len(), 8760);
}
