use ndarray::Array2;
use rand::Rng;

use crate::crf::{viterbi_decode, TransitionMatrix};
use crate::error::{Error, Result};
use crate::pipeline::SensorWindow;
use crate::rng::SimRng;
use crate::room::Room;

use super::layers::{embed, position_encoding, Affine, Dcsa, Grn, Multihead, Norm};
use super::tape::{NodeId, Tape};
use super::MdcsaConfig;

/// Named parameter tensors in creation order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub names: Vec<String>,
    pub values: Vec<Array2<f64>>,
}

impl ParamStore {
    fn add(&mut self, name: String, value: Array2<f64>) -> usize {
        self.names.push(name);
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

struct Builder<'a, R: Rng> {
    store: ParamStore,
    rng: &'a mut R,
}

impl<R: Rng> Builder<'_, R> {
    fn uniform(&mut self, name: String, rows: usize, cols: usize, fan_in: usize) -> usize {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let v = Array2::from_shape_fn((rows, cols), |_| self.rng.random_range(-bound..bound));
        self.store.add(name, v)
    }

    fn affine(&mut self, name: &str, fan_in: usize, out: usize) -> Affine {
        Affine {
            w: self.uniform(format!("{name}.w"), fan_in, out, fan_in),
            b: self.uniform(format!("{name}.b"), 1, out, fan_in),
        }
    }

    fn matrix(&mut self, name: &str, fan_in: usize, out: usize) -> usize {
        self.uniform(name.to_string(), fan_in, out, fan_in)
    }

    fn norm(&mut self, name: &str, d: usize) -> Norm {
        Norm {
            gain: self.store.add(format!("{name}.gain"), Array2::ones((1, d))),
            bias: self.store.add(format!("{name}.bias"), Array2::zeros((1, d))),
        }
    }
}

#[derive(Debug, Clone)]
enum AccelInput {
    Embedding(Affine),
    Constant(usize),
}

#[derive(Debug, Clone)]
struct Layout {
    rssi: Affine,
    accel: AccelInput,
    body: Multihead,
    room_head: Affine,
    hallway_head: Affine,
    transitions: usize,
    start: usize,
}

pub enum Mode<'r> {
    Eval,
    Train(&'r mut SimRng),
}

/// Node ids of the network outputs on a tape.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub hidden: NodeId,
    pub emissions: NodeId,
    pub hallway_logits: NodeId,
}

#[derive(Debug, Clone)]
pub struct MdcsaModel {
    pub config: MdcsaConfig,
    pub params: ParamStore,
    layout: Layout,
    pe: Array2<f64>,
}

impl MdcsaModel {
    pub fn new(config: MdcsaConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let d = config.d;
        let m = config.n_rooms;
        let mut b = Builder {
            store: ParamStore::default(),
            rng,
        };
        let rssi = b.affine("embed.rssi", config.rssi_channels, d);
        let accel = if config.rssi_only() {
            AccelInput::Constant(b.uniform("embed.accel_const".into(), 1, d, d))
        } else {
            AccelInput::Embedding(b.affine("embed.accel", config.accel_channels, d))
        };
        let mut blocks = Vec::new();
        for (i, &k) in config.kernels.iter().enumerate() {
            let p = format!("dcsa{i}");
            blocks.push(Dcsa {
                kernel: k,
                conv: b.affine(&format!("{p}.conv"), k * d, d),
                wq: b.matrix(&format!("{p}.wq"), d, d),
                wk: b.matrix(&format!("{p}.wk"), d, d),
                wv: b.matrix(&format!("{p}.wv"), d, d),
                norms: [b.norm(&format!("{p}.norm_rssi"), d), b.norm(&format!("{p}.norm_accel"), d)],
                grn: Grn {
                    w1: b.matrix(&format!("{p}.grn.w1"), d, d),
                    w3: b.matrix(&format!("{p}.grn.w3"), d, d),
                    b1: b.uniform(format!("{p}.grn.b1"), 1, d, 2 * d),
                    w2: b.matrix(&format!("{p}.grn.w2"), d, d),
                    b2: b.uniform(format!("{p}.grn.b2"), 1, d, d),
                    gate: b.affine(&format!("{p}.grn.gate"), d, d),
                    value: b.affine(&format!("{p}.grn.value"), d, d),
                    norm: b.norm(&format!("{p}.grn.norm"), d),
                },
            });
        }
        let n = blocks.len();
        let body = Multihead {
            blocks,
            wq: b.matrix("outer.wq", d, d),
            wk: b.matrix("outer.wk", d, d),
            wv: b.matrix("outer.wv", d, d),
            aggregate: b.affine("outer.aggregate", n * d, d),
            norm: b.norm("outer.norm", d),
        };
        let room_head = b.affine("head.room", d, m);
        let hallway_head = b.affine("head.hallway", d, 1);
        let transitions = b.store.add("crf.transitions".into(), Array2::zeros((m, m)));
        let start = b.store.add("crf.start".into(), Array2::zeros((1, m)));
        let pe = position_encoding(config.window_len, d);
        Ok(MdcsaModel {
            layout: Layout {
                rssi,
                accel,
                body,
                room_head,
                hallway_head,
                transitions,
                start,
            },
            params: b.store,
            pe,
            config,
        })
    }

    /// Rebuilds a model around saved values; names and shapes must match
    /// what `config` produces.
    pub fn with_params(config: MdcsaConfig, params: ParamStore) -> Result<Self> {
        let mut rng = crate::rng::substream(0, "shape-template", &[]);
        let mut model = MdcsaModel::new(config, &mut rng)?;
        if params.names != model.params.names {
            return Err(Error::invalid("parameter names do not match the configuration"));
        }
        for (name, (a, b)) in params.names.iter().zip(params.values.iter().zip(&model.params.values)) {
            if a.dim() != b.dim() {
                return Err(Error::shape(format!("{name} {:?}", b.dim()), format!("{:?}", a.dim())));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn transitions(&self) -> TransitionMatrix {
        TransitionMatrix {
            scores: self.params.values[self.layout.transitions].clone(),
            start: self.params.values[self.layout.start].row(0).to_owned(),
        }
    }

    fn check_window(&self, w: &SensorWindow) -> Result<()> {
        let c = &self.config;
        if w.rssi.dim() != (c.window_len, c.rssi_channels) {
            return Err(Error::shape(
                format!("{}x{} RSSI", c.window_len, c.rssi_channels),
                format!("{:?}", w.rssi.dim()),
            ));
        }
        match (&w.accel, c.rssi_only()) {
            (Some(a), false) if a.dim() == (c.window_len, c.accel_channels) => Ok(()),
            (_, true) => Ok(()),
            (a, false) => Err(Error::shape(
                format!("{}x{} accelerometer", c.window_len, c.accel_channels),
                format!("{:?}", a.as_ref().map(|a| a.dim())),
            )),
        }
    }

    /// Puts the network for one window on `tape`.
    pub fn build<'p>(&'p self, tape: &mut Tape<'p>, w: &SensorWindow, mode: Mode) -> Result<Forward> {
        self.check_window(w)?;
        let t_len = self.config.window_len;
        let pe = tape.input(self.pe.clone());
        let xr = tape.input(w.rssi.clone());
        let hr = embed(tape, xr, self.layout.rssi, pe);
        let ha = match &self.layout.accel {
            AccelInput::Embedding(map) => {
                let xa = tape.input(w.accel.clone().expect("checked above"));
                embed(tape, xa, *map, pe)
            }
            AccelInput::Constant(c) => {
                let c = tape.param(*c);
                let bc = tape.broadcast_rows(c, t_len);
                tape.add(bc, pe)
            }
        };
        let mut hidden = self.layout.body.apply(tape, hr, ha);
        if let Mode::Train(rng) = mode {
            let p = self.config.dropout;
            if p > 0.0 {
                let keep = 1.0 / (1.0 - p);
                let mask = Array2::from_shape_fn((t_len, self.config.d), |_| {
                    if rng.random_bool(1.0 - p) {
                        keep
                    } else {
                        0.0
                    }
                });
                let mask = tape.input(mask);
                hidden = tape.mul(hidden, mask);
            }
        }
        let emissions = self.layout.room_head.apply(tape, hidden);
        let hallway_logits = self.layout.hallway_head.apply(tape, hidden);
        Ok(Forward {
            hidden,
            emissions,
            hallway_logits,
        })
    }

    /// Emissions (`T × m`) and hallway logits (length `T`).
    pub fn forward(&self, w: &SensorWindow, mode: Mode) -> Result<(Array2<f64>, Vec<f64>)> {
        let mut tape = Tape::new(&self.params.values);
        let f = self.build(&mut tape, w, mode)?;
        Ok((tape.value(f.emissions).clone(), tape.value(f.hallway_logits).column(0).to_vec()))
    }

    /// Total loss (CRF NLL + mean BCE on the referenced room) and its
    /// gradient for each parameter.
    pub fn loss_and_gradients(&self, w: &SensorWindow, mode: Mode) -> Result<(f64, Vec<Array2<f64>>)> {
        let m = self.config.n_rooms;
        let gold: Vec<usize> = w.labels.iter().map(|r| r.index()).collect();
        if let Some(&bad) = gold.iter().find(|&&g| g >= m) {
            return Err(Error::LabelOutOfRange { label: bad, rooms: m });
        }
        let target: Vec<f64> =
            w.labels.iter().map(|&r| if r == self.config.referenced_room { 1.0 } else { 0.0 }).collect();
        let mut tape = Tape::new(&self.params.values);
        let f = self.build(&mut tape, w, mode)?;
        let (tr, st) = (tape.param(self.layout.transitions), tape.param(self.layout.start));
        let nll = tape.crf_nll(f.emissions, tr, st, &gold)?;
        let bce = tape.bce_logits(f.hallway_logits, &target);
        let total = tape.add(nll, bce);
        let loss = tape.scalar(total);
        let grads = tape
            .backward(total)
            .into_iter()
            .zip(&self.params.values)
            .map(|(g, p)| g.unwrap_or_else(|| Array2::zeros(p.dim())))
            .collect();
        Ok((loss, grads))
    }

    /// Viterbi room sequence for one window in eval mode.
    pub fn predict(&self, w: &SensorWindow) -> Result<Vec<Room>> {
        let (em, _) = self.forward(w, Mode::Eval)?;
        let (path, _) = viterbi_decode(em.view(), &self.transitions())?;
        Ok(path.into_iter().map(|i| Room::from_index(i).expect("label in range")).collect())
    }
}
