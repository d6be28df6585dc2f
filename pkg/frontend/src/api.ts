/** Client for the focus-control wire protocol. */

export interface Meta {
  width: number;
  height: number;
  depth_count: number;
  focal_lengths_mm: number[];
}

export interface FocusResponse {
  depth_index: number;
  focal_length_mm: number;
  nearest_frame: number;
  valid: boolean;
}

export interface FocusApi {
  meta(): Promise<Meta>;
  focus(x: number, y: number): Promise<FocusResponse>;
  /** Raw bytes of the normalized preview PGM. */
  preview(): Promise<ArrayBuffer>;
  /** Frame image bytes (PNG) for slice z. */
  frame(z: number): Promise<Blob>;
}

export class HttpFocusApi implements FocusApi {
  constructor(private readonly base: string) {}

  private async get(path: string): Promise<Response> {
    const res = await fetch(this.base + path);
    if (!res.ok) {
      throw new Error(`${path}: HTTP ${res.status}`);
    }
    return res;
  }

  async meta(): Promise<Meta> {
    return (await this.get("/meta")).json();
  }

  async focus(x: number, y: number): Promise<FocusResponse> {
    return (await this.get(`/focus?x=${x}&y=${y}`)).json();
  }

  async preview(): Promise<ArrayBuffer> {
    return (await this.get("/preview")).arrayBuffer();
  }

  async frame(z: number): Promise<Blob> {
    return (await this.get(`/frame/${z}`)).blob();
  }
}
