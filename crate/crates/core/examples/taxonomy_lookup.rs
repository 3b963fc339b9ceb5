//! Prints how a few data types are classified.

use mhealth_audit::model::Taxonomy;

fn main() -> mhealth_audit::Result<()> {
    let taxonomy = Taxonomy::default_taxonomy();
    for id in [
        "advertising_id",
        "city",
        "body_weight",
        "heart_rate",
        "ovulation_date",
    ] {
        let info = taxonomy.lookup(id)?;
        println!(
            "{id:<16} {:<20} {:<12} label={}",
            info.category.display_name(),
            info.specificity.as_str(),
            info.label
        );
    }
    match taxonomy.lookup("shoe_size") {
        Err(e) => println!("shoe_size: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
