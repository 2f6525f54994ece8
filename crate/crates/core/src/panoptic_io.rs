//! COCO panoptic archives: a JSON index plus one RGB PNG per image where the
//! segment id of a pixel is `R + 256 G + 256^2 B`.
//!
//! Crowd segments are read as void. Segment areas in the JSON are checked
//! against the PNG on every read.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panoptic::{
    Category, CategoryTable, PanopticAnnotation, PanopticMap, SegmentInfo, VOID_SEGMENT,
};

pub fn rgb_to_id(rgb: [u8; 3]) -> u32 {
    rgb[0] as u32 + 256 * rgb[1] as u32 + 256 * 256 * rgb[2] as u32
}

pub fn id_to_rgb(id: u32) -> [u8; 3] {
    [
        (id % 256) as u8,
        ((id / 256) % 256) as u8,
        ((id / 65536) % 256) as u8,
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub id: u32,
    pub category_id: u32,
    pub area: u64,
    /// `[x, y, width, height]`
    pub bbox: [u32; 4],
    #[serde(default)]
    pub iscrowd: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image_id: u64,
    pub file_name: String,
    pub segments_info: Vec<SegmentRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub id: u32,
    pub name: String,
    pub isthing: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supercategory: Option<String>,
}

/// The JSON index of a panoptic archive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanopticIndex {
    #[serde(default)]
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<AnnotationRecord>,
    pub categories: Vec<CategoryRecord>,
}

impl PanopticIndex {
    pub fn category_table(&self) -> CategoryTable {
        CategoryTable::new(
            self.categories
                .iter()
                .map(|c| Category {
                    id: c.id,
                    name: c.name.clone(),
                    is_thing: c.isthing != 0,
                })
                .collect(),
        )
    }
}

pub fn category_records(table: &CategoryTable) -> Vec<CategoryRecord> {
    table
        .iter()
        .map(|c| CategoryRecord {
            id: c.id,
            name: c.name.clone(),
            isthing: c.is_thing as u8,
            supercategory: None,
        })
        .collect()
}

/// An on-disk archive: JSON index and the directory holding its PNGs.
#[derive(Debug, Clone)]
pub struct PanopticArchive {
    pub json_path: PathBuf,
    pub png_dir: PathBuf,
    pub index: PanopticIndex,
}

/// PNG directory paired with an index file: `panoptic_val.json` -> `panoptic_val/`.
pub fn default_png_dir(json_path: &Path) -> PathBuf {
    json_path.with_extension("")
}

impl PanopticArchive {
    pub fn open(json_path: &Path, png_dir: Option<&Path>) -> Result<Self> {
        let text = fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
        let index: PanopticIndex = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: json_path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            json_path: json_path.to_path_buf(),
            png_dir: png_dir.map_or_else(|| default_png_dir(json_path), Path::to_path_buf),
            index,
        })
    }

    pub fn categories(&self) -> CategoryTable {
        self.index.category_table()
    }

    /// Image ids in index order.
    pub fn image_ids(&self) -> Vec<u64> {
        self.index.annotations.iter().map(|a| a.image_id).collect()
    }

    /// Reads one image; `downsample` applies nearest-neighbor reduction by that factor.
    pub fn read_annotation(
        &self,
        image_id: u64,
        downsample: Option<usize>,
    ) -> Result<PanopticAnnotation> {
        let record = self
            .index
            .annotations
            .iter()
            .find(|a| a.image_id == image_id)
            .ok_or(Error::MissingImage(image_id))?;
        let path = self.png_dir.join(&record.file_name);
        let ids = read_id_png(&path)?;
        if let Some(img) = self.index.images.iter().find(|i| i.id == image_id) {
            if ids.dim() != (img.height as usize, img.width as usize) {
                return Err(Error::MalformedPng {
                    path,
                    detail: format!(
                        "size {:?} does not match the {}x{} image record",
                        ids.dim(),
                        img.width,
                        img.height
                    ),
                });
            }
        }
        let ann = annotation_from_parts(image_id, ids, &record.segments_info, &self.categories())?;
        Ok(match downsample {
            Some(f) if f > 1 => ann.downsample(f),
            _ => ann,
        })
    }
}

fn annotation_from_parts(
    image_id: u64,
    mut ids: Array2<u32>,
    segments_info: &[SegmentRecord],
    categories: &CategoryTable,
) -> Result<PanopticAnnotation> {
    let mut areas: BTreeMap<u32, u64> = BTreeMap::new();
    for &id in ids.iter() {
        if id != VOID_SEGMENT {
            *areas.entry(id).or_insert(0) += 1;
        }
    }
    let listed: BTreeSet<u32> = segments_info.iter().map(|s| s.id).collect();
    if listed.len() != segments_info.len() {
        return Err(Error::IdMismatch {
            image_id,
            detail: "duplicate segment id in json".into(),
        });
    }
    if let Some(id) = areas.keys().find(|id| !listed.contains(id)) {
        return Err(Error::IdMismatch {
            image_id,
            detail: format!("png id {id} is not listed in json"),
        });
    }

    let mut segments = BTreeMap::new();
    let mut crowd = BTreeSet::new();
    for s in segments_info {
        let Some(&png_area) = areas.get(&s.id) else {
            return Err(Error::IdMismatch {
                image_id,
                detail: format!("json segment {} does not appear in png", s.id),
            });
        };
        if png_area != s.area {
            return Err(Error::AreaMismatch {
                image_id,
                segment_id: s.id,
                json: s.area,
                png: png_area,
            });
        }
        let is_thing = categories.is_thing(s.category_id).ok_or_else(|| {
            Error::VocabularyMismatch(format!(
                "image {image_id}: segment {} has unknown category {}",
                s.id, s.category_id
            ))
        })?;
        if s.iscrowd != 0 {
            crowd.insert(s.id);
            continue;
        }
        segments.insert(
            s.id,
            SegmentInfo {
                category: s.category_id,
                is_thing,
            },
        );
    }
    if !crowd.is_empty() {
        ids.mapv_inplace(|id| {
            if crowd.contains(&id) {
                VOID_SEGMENT
            } else {
                id
            }
        });
    }
    PanopticAnnotation::new(ids, segments)
}

pub fn read_id_png(path: &Path) -> Result<Array2<u32>> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(source) => Error::io(path, source),
        other => Error::MalformedPng {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
        rgb_to_id(rgb.get_pixel(c as u32, r as u32).0)
    }))
}

pub fn write_id_png(ids: &Array2<u32>, path: &Path) -> Result<()> {
    let (h, w) = ids.dim();
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        Rgb(id_to_rgb(ids[(y as usize, x as usize)]))
    });
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(source) => Error::io(path, source),
            other => Error::MalformedPng {
                path: path.to_path_buf(),
                detail: other.to_string(),
            },
        })
}

fn bbox_of(ids: &Array2<u32>) -> BTreeMap<u32, [u32; 4]> {
    let mut boxes: BTreeMap<u32, (usize, usize, usize, usize)> = BTreeMap::new();
    for ((r, c), &id) in ids.indexed_iter() {
        if id == VOID_SEGMENT {
            continue;
        }
        let b = boxes.entry(id).or_insert((r, c, r, c));
        b.0 = b.0.min(r);
        b.1 = b.1.min(c);
        b.2 = b.2.max(r);
        b.3 = b.3.max(c);
    }
    boxes
        .into_iter()
        .map(|(id, (r0, c0, r1, c1))| {
            (
                id,
                [
                    c0 as u32,
                    r0 as u32,
                    (c1 - c0 + 1) as u32,
                    (r1 - r0 + 1) as u32,
                ],
            )
        })
        .collect()
}

/// Writes `map` as `png_dir/file_name` and returns its index entry.
///
/// Segment records follow the order of `map.segments`.
pub fn write_prediction(
    map: &PanopticMap,
    png_dir: &Path,
    image_id: u64,
    file_name: &str,
) -> Result<AnnotationRecord> {
    write_id_png(&map.segment_ids, &png_dir.join(file_name))?;
    let boxes = bbox_of(&map.segment_ids);
    let segments_info = map
        .segments
        .iter()
        .filter(|s| s.area > 0)
        .map(|s| SegmentRecord {
            id: s.id,
            category_id: s.category,
            area: s.area,
            bbox: boxes.get(&s.id).copied().unwrap_or([0; 4]),
            iscrowd: 0,
        })
        .collect();
    Ok(AnnotationRecord {
        image_id,
        file_name: file_name.to_string(),
        segments_info,
    })
}

/// Collects entries and writes the JSON index at the end.
#[derive(Debug)]
pub struct ArchiveWriter {
    json_path: PathBuf,
    png_dir: PathBuf,
    index: PanopticIndex,
}

impl ArchiveWriter {
    pub fn new(json_path: &Path, categories: &CategoryTable) -> Self {
        Self {
            json_path: json_path.to_path_buf(),
            png_dir: default_png_dir(json_path),
            index: PanopticIndex {
                images: Vec::new(),
                annotations: Vec::new(),
                categories: category_records(categories),
            },
        }
    }

    pub fn png_dir(&self) -> &Path {
        &self.png_dir
    }

    pub fn add(&mut self, image_id: u64, map: &PanopticMap) -> Result<()> {
        let stem = format!("{image_id:012}");
        let record = write_prediction(map, &self.png_dir, image_id, &format!("{stem}.png"))?;
        self.index.images.push(ImageRecord {
            id: image_id,
            file_name: format!("{stem}.jpg"),
            width: map.width() as u32,
            height: map.height() as u32,
        });
        self.index.annotations.push(record);
        Ok(())
    }

    pub fn finish(self) -> Result<PanopticArchive> {
        if let Some(dir) = self.json_path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let text = serde_json::to_string_pretty(&self.index).map_err(|source| Error::Json {
            path: self.json_path.clone(),
            source,
        })?;
        fs::write(&self.json_path, text).map_err(|e| Error::io(&self.json_path, e))?;
        Ok(PanopticArchive {
            json_path: self.json_path,
            png_dir: self.png_dir,
            index: self.index,
        })
    }
}
