//! Dialect files, message schemas and payload packing.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use super::crc::crc16;
use super::ProtoError;

pub const MAX_PAYLOAD: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarType {
    U8,
    I8,
    U16,
    I16,
    U32,
    I32,
    U64,
    I64,
    F32,
    F64,
}

impl ScalarType {
    pub fn size(self) -> usize {
        match self {
            Self::U8 | Self::I8 => 1,
            Self::U16 | Self::I16 => 2,
            Self::U32 | Self::I32 | Self::F32 => 4,
            Self::U64 | Self::I64 | Self::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::U8 => "u8",
            Self::I8 => "i8",
            Self::U16 => "u16",
            Self::I16 => "i16",
            Self::U32 => "u32",
            Self::I32 => "i32",
            Self::U64 => "u64",
            Self::I64 => "i64",
            Self::F32 => "f32",
            Self::F64 => "f64",
        }
    }

    fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "u8" => Self::U8,
            "i8" => Self::I8,
            "u16" => Self::U16,
            "i16" => Self::I16,
            "u32" => Self::U32,
            "i32" => Self::I32,
            "u64" => Self::U64,
            "i64" => Self::I64,
            "f32" => Self::F32,
            "f64" => Self::F64,
            _ => return None,
        })
    }

    pub fn zero(self) -> Value {
        match self {
            Self::U8 => Value::U8(0),
            Self::I8 => Value::I8(0),
            Self::U16 => Value::U16(0),
            Self::I16 => Value::I16(0),
            Self::U32 => Value::U32(0),
            Self::I32 => Value::I32(0),
            Self::U64 => Value::U64(0),
            Self::I64 => Value::I64(0),
            Self::F32 => Value::F32(0.0),
            Self::F64 => Value::F64(0.0),
        }
    }
}

/// Wire type of one field: a scalar or a fixed-length array of scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldType {
    pub scalar: ScalarType,
    pub array_len: Option<usize>,
}

impl FieldType {
    pub fn size(&self) -> usize {
        self.scalar.size() * self.array_len.unwrap_or(1)
    }

    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Some(open) = text.find('[') {
            let inner = text[open + 1..].strip_suffix(']')?;
            let len: usize = inner.parse().ok()?;
            if len == 0 {
                return None;
            }
            Some(Self {
                scalar: ScalarType::parse(&text[..open])?,
                array_len: Some(len),
            })
        } else {
            Some(Self {
                scalar: ScalarType::parse(text)?,
                array_len: None,
            })
        }
    }

    pub fn zero(&self) -> Value {
        match self.array_len {
            None => self.scalar.zero(),
            Some(n) => Value::Array(vec![self.scalar.zero(); n]),
        }
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.array_len {
            None => f.write_str(self.scalar.name()),
            Some(n) => write!(f, "{}[{n}]", self.scalar.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSchema {
    pub name: String,
    pub ty: FieldType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageSchema {
    pub msg_id: u8,
    pub name: String,
    pub fields: Vec<FieldSchema>,
    pub crc_extra: u8,
}

impl MessageSchema {
    /// Builds a schema and derives its checksum seed.
    pub fn new(msg_id: u8, name: &str, fields: Vec<FieldSchema>) -> Result<Self, ProtoError> {
        let len: usize = fields.iter().map(|f| f.ty.size()).sum();
        if len > MAX_PAYLOAD {
            return Err(ProtoError::Schema {
                message: name.to_string(),
                reason: format!("payload of {len} bytes exceeds {MAX_PAYLOAD}"),
            });
        }
        let crc_extra = compute_crc_extra(name, &fields);
        Ok(Self {
            msg_id,
            name: name.to_string(),
            fields,
            crc_extra,
        })
    }

    pub fn payload_len(&self) -> usize {
        self.fields.iter().map(|f| f.ty.size()).sum()
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// A message of this type with every field zeroed.
    pub fn zeroed(&self) -> Message {
        Message {
            msg_id: self.msg_id,
            values: self.fields.iter().map(|f| f.ty.zero()).collect(),
        }
    }

    pub fn pack(&self, msg: &Message) -> Result<Vec<u8>, ProtoError> {
        if msg.msg_id != self.msg_id || msg.values.len() != self.fields.len() {
            return Err(ProtoError::ValueMismatch {
                message: self.name.clone(),
                field: String::new(),
            });
        }
        let mut out = Vec::with_capacity(self.payload_len());
        for (field, value) in self.fields.iter().zip(&msg.values) {
            if !value.matches(&field.ty) {
                return Err(ProtoError::ValueMismatch {
                    message: self.name.clone(),
                    field: field.name.clone(),
                });
            }
            value.write_le(&mut out);
        }
        Ok(out)
    }

    pub fn unpack(&self, payload: &[u8]) -> Result<Message, ProtoError> {
        let expected = self.payload_len();
        if payload.len() != expected {
            return Err(ProtoError::PayloadLength {
                message: self.name.clone(),
                expected,
                actual: payload.len(),
            });
        }
        let mut cursor = payload;
        let values = self
            .fields
            .iter()
            .map(|f| match f.ty.array_len {
                None => read_scalar(f.ty.scalar, &mut cursor),
                Some(n) => Value::Array(
                    (0..n)
                        .map(|_| read_scalar(f.ty.scalar, &mut cursor))
                        .collect(),
                ),
            })
            .collect();
        Ok(Message {
            msg_id: self.msg_id,
            values,
        })
    }
}

/// CRC over "NAME " then "TYPE NAME " per field, folded to a byte.
pub fn compute_crc_extra(name: &str, fields: &[FieldSchema]) -> u8 {
    let mut text = String::with_capacity(64);
    text.push_str(name);
    text.push(' ');
    for f in fields {
        text.push_str(&f.ty.to_string());
        text.push(' ');
        text.push_str(&f.name);
        text.push(' ');
    }
    let crc = crc16(text.as_bytes());
    ((crc >> 8) as u8) ^ (crc & 0xFF) as u8
}

fn take<const N: usize>(cursor: &mut &[u8]) -> [u8; N] {
    let (head, rest) = cursor.split_at(N);
    *cursor = rest;
    head.try_into().expect("length checked by caller")
}

fn read_scalar(ty: ScalarType, cursor: &mut &[u8]) -> Value {
    match ty {
        ScalarType::U8 => Value::U8(take::<1>(cursor)[0]),
        ScalarType::I8 => Value::I8(i8::from_le_bytes(take(cursor))),
        ScalarType::U16 => Value::U16(u16::from_le_bytes(take(cursor))),
        ScalarType::I16 => Value::I16(i16::from_le_bytes(take(cursor))),
        ScalarType::U32 => Value::U32(u32::from_le_bytes(take(cursor))),
        ScalarType::I32 => Value::I32(i32::from_le_bytes(take(cursor))),
        ScalarType::U64 => Value::U64(u64::from_le_bytes(take(cursor))),
        ScalarType::I64 => Value::I64(i64::from_le_bytes(take(cursor))),
        ScalarType::F32 => Value::F32(f32::from_le_bytes(take(cursor))),
        ScalarType::F64 => Value::F64(f64::from_le_bytes(take(cursor))),
    }
}

/// One decoded field value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    U8(u8),
    I8(i8),
    U16(u16),
    I16(i16),
    U32(u32),
    I32(i32),
    U64(u64),
    I64(i64),
    F32(f32),
    F64(f64),
    Array(Vec<Value>),
}

impl Value {
    fn scalar_type(&self) -> Option<ScalarType> {
        Some(match self {
            Self::U8(_) => ScalarType::U8,
            Self::I8(_) => ScalarType::I8,
            Self::U16(_) => ScalarType::U16,
            Self::I16(_) => ScalarType::I16,
            Self::U32(_) => ScalarType::U32,
            Self::I32(_) => ScalarType::I32,
            Self::U64(_) => ScalarType::U64,
            Self::I64(_) => ScalarType::I64,
            Self::F32(_) => ScalarType::F32,
            Self::F64(_) => ScalarType::F64,
            Self::Array(_) => return None,
        })
    }

    pub fn matches(&self, ty: &FieldType) -> bool {
        match (self, ty.array_len) {
            (Self::Array(items), Some(n)) => {
                items.len() == n && items.iter().all(|v| v.scalar_type() == Some(ty.scalar))
            }
            (_, None) => self.scalar_type() == Some(ty.scalar),
            _ => false,
        }
    }

    fn write_le(&self, out: &mut Vec<u8>) {
        match self {
            Self::U8(v) => out.push(*v),
            Self::I8(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::U16(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::I16(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::U32(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::I32(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::U64(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::I64(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::F32(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::F64(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::Array(items) => items.iter().for_each(|v| v.write_le(out)),
        }
    }

    /// Numeric view of a scalar; arrays yield `None`.
    pub fn as_f64(&self) -> Option<f64> {
        Some(match self {
            Self::U8(v) => f64::from(*v),
            Self::I8(v) => f64::from(*v),
            Self::U16(v) => f64::from(*v),
            Self::I16(v) => f64::from(*v),
            Self::U32(v) => f64::from(*v),
            Self::I32(v) => f64::from(*v),
            Self::U64(v) => *v as f64,
            Self::I64(v) => *v as f64,
            Self::F32(v) => f64::from(*v),
            Self::F64(v) => *v,
            Self::Array(_) => return None,
        })
    }

    /// Converts a number into a scalar of the given type, saturating integers.
    pub fn from_f64(ty: ScalarType, x: f64) -> Self {
        match ty {
            ScalarType::U8 => Self::U8(x.round().clamp(0.0, 255.0) as u8),
            ScalarType::I8 => Self::I8(x.round().clamp(-128.0, 127.0) as i8),
            ScalarType::U16 => Self::U16(x.round().clamp(0.0, 65535.0) as u16),
            ScalarType::I16 => Self::I16(x.round().clamp(-32768.0, 32767.0) as i16),
            ScalarType::U32 => Self::U32(x.round().clamp(0.0, f64::from(u32::MAX)) as u32),
            ScalarType::I32 => {
                Self::I32(x.round().clamp(f64::from(i32::MIN), f64::from(i32::MAX)) as i32)
            }
            ScalarType::U64 => Self::U64(x.round().max(0.0) as u64),
            ScalarType::I64 => Self::I64(x.round() as i64),
            ScalarType::F32 => Self::F32(x as f32),
            ScalarType::F64 => Self::F64(x),
        }
    }
}

/// A message as an ordered list of field values matching its schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub msg_id: u8,
    pub values: Vec<Value>,
}

/// All messages of one dialect, keyed by id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Registry {
    pub dialect: String,
    by_id: BTreeMap<u8, MessageSchema>,
}

impl Registry {
    pub fn from_schemas(dialect: &str, schemas: Vec<MessageSchema>) -> Result<Self, ProtoError> {
        let mut by_id = BTreeMap::new();
        for schema in schemas {
            if by_id.contains_key(&schema.msg_id) {
                return Err(ProtoError::Schema {
                    message: schema.name.clone(),
                    reason: format!("duplicate message id {}", schema.msg_id),
                });
            }
            by_id.insert(schema.msg_id, schema);
        }
        Ok(Self {
            dialect: dialect.to_string(),
            by_id,
        })
    }

    pub fn get(&self, msg_id: u8) -> Option<&MessageSchema> {
        self.by_id.get(&msg_id)
    }

    pub fn by_name(&self, name: &str) -> Option<&MessageSchema> {
        self.by_id.values().find(|s| s.name == name)
    }

    pub fn schemas(&self) -> impl Iterator<Item = &MessageSchema> {
        self.by_id.values()
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Builds a message by name, setting the listed numeric fields and
    /// zeroing the rest.
    pub fn build(&self, name: &str, fields: &[(&str, f64)]) -> Result<Message, ProtoError> {
        let schema = self
            .by_name(name)
            .ok_or_else(|| ProtoError::UnknownMessage(name.to_string()))?;
        let mut msg = schema.zeroed();
        for &(field, x) in fields {
            let idx = schema
                .field_index(field)
                .ok_or_else(|| ProtoError::ValueMismatch {
                    message: name.to_string(),
                    field: field.to_string(),
                })?;
            msg.values[idx] = Value::from_f64(schema.fields[idx].ty.scalar, x);
        }
        Ok(msg)
    }

    /// Named numeric field of a decoded message.
    pub fn field(&self, msg: &Message, field: &str) -> Option<f64> {
        let schema = self.get(msg.msg_id)?;
        msg.values.get(schema.field_index(field)?)?.as_f64()
    }

    pub fn field_value<'m>(&self, msg: &'m Message, field: &str) -> Option<&'m Value> {
        let schema = self.get(msg.msg_id)?;
        msg.values.get(schema.field_index(field)?)
    }
}

/// Parses a dialect document.
pub fn parse_schema(text: &str) -> Result<Registry, ProtoError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| ProtoError::Schema {
        message: String::new(),
        reason: format!("malformed dialect document: {e}"),
    })?;
    let root = doc.root_element();
    let dialect = root.attribute("name").unwrap_or("unnamed").to_string();
    let mut schemas = Vec::new();
    for node in root.children().filter(|n| n.has_tag_name("message")) {
        let name = node.attribute("name").unwrap_or("").trim().to_string();
        let schema_err = |reason: String| ProtoError::Schema {
            message: name.clone(),
            reason,
        };
        if name.is_empty() {
            return Err(schema_err("message without a name".into()));
        }
        let id: u8 = node
            .attribute("id")
            .ok_or_else(|| schema_err("missing id".into()))?
            .trim()
            .parse()
            .map_err(|_| schema_err("id must be an integer 0-255".into()))?;
        let mut fields = Vec::new();
        for f in node.children().filter(|n| n.has_tag_name("field")) {
            let fname = f.attribute("name").unwrap_or("").trim();
            let ftype = f.attribute("type").unwrap_or("");
            if fname.is_empty() {
                return Err(schema_err("field without a name".into()));
            }
            let ty = FieldType::parse(ftype)
                .ok_or_else(|| schema_err(format!("unknown type `{ftype}` for field `{fname}`")))?;
            if fields.iter().any(|x: &FieldSchema| x.name == fname) {
                return Err(schema_err(format!("duplicate field `{fname}`")));
            }
            fields.push(FieldSchema {
                name: fname.to_string(),
                ty,
            });
        }
        schemas.push(MessageSchema::new(id, &name, fields)?);
    }
    Registry::from_schemas(&dialect, schemas)
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Registry, ProtoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ProtoError::Io(format!("{}: {e}", path.display())))?;
    parse_schema(&text)
}

/// Text of the dialect shipped with the crate.
pub const CORE_DIALECT: &str = include_str!("../../fixtures/core_dialect.xml");

/// Registry of the shipped dialect.
pub fn core_registry() -> Arc<Registry> {
    static CORE: std::sync::OnceLock<Arc<Registry>> = std::sync::OnceLock::new();
    CORE.get_or_init(|| Arc::new(parse_schema(CORE_DIALECT).expect("shipped dialect parses")))
        .clone()
}
