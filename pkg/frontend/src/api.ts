import type {
  ActionCreateBody,
  ActionInfo,
  AdapterInfo,
  ErrorDetail,
  ProjectInfo,
  TaskInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: ErrorDetail,
  ) {
    super(detail.message || `HTTP ${status}`);
  }
}

/** Thin typed client over the service endpoints. The token lives in memory
 * only; it is never written to persistent browser storage. */
export class ApiClient {
  private token: string | null = null;

  constructor(
    public baseUrl: string,
    private fetchFn: typeof fetch = fetch.bind(globalThis),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private headers(json = true): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail: ErrorDetail = { error: "HttpError", message: `HTTP ${response.status}` };
      try {
        const body = (await response.json()) as { detail?: ErrorDetail | string };
        if (typeof body.detail === "string") {
          detail = { error: "HttpError", message: body.detail };
        } else if (body.detail) {
          detail = body.detail;
        }
      } catch {
        // non-JSON error body: keep the generic detail
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async login(token: string): Promise<string> {
    const body = await this.request<{ user_id: string }>("/auth/login", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ token }),
    });
    this.token = token;
    return body.user_id;
  }

  async tasks(): Promise<TaskInfo[]> {
    const body = await this.request<{ tasks: TaskInfo[] }>("/tasks");
    return body.tasks;
  }

  async adapters(taskId: string, projectId?: string): Promise<AdapterInfo[]> {
    const query = projectId ? `?project_id=${encodeURIComponent(projectId)}` : "";
    const body = await this.request<{ adapters: AdapterInfo[] }>(
      `/tasks/${encodeURIComponent(taskId)}/adapters${query}`,
      { headers: this.headers(false) },
    );
    return body.adapters;
  }

  async listProjects(): Promise<ProjectInfo[]> {
    const body = await this.request<{ projects: ProjectInfo[] }>("/projects", {
      headers: this.headers(false),
    });
    return body.projects;
  }

  async createProject(name: string, locator: string, backend = "csv_file"): Promise<ProjectInfo> {
    return this.request<ProjectInfo>("/projects", {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ name, sheet: { backend, locator } }),
    });
  }

  async listActions(projectId: string): Promise<ActionInfo[]> {
    const body = await this.request<{ actions: ActionInfo[] }>(
      `/projects/${encodeURIComponent(projectId)}/actions`,
      { headers: this.headers(false) },
    );
    return body.actions;
  }

  async createAction(projectId: string, body: ActionCreateBody): Promise<ActionInfo> {
    return this.request<ActionInfo>(`/projects/${encodeURIComponent(projectId)}/actions`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(body),
    });
  }

  async executeAction(actionId: string): Promise<{ job_id: string; action: ActionInfo }> {
    return this.request(`/actions/${encodeURIComponent(actionId)}/execute`, {
      method: "POST",
      headers: this.headers(false),
    });
  }

  async getAction(actionId: string): Promise<ActionInfo> {
    return this.request<ActionInfo>(`/actions/${encodeURIComponent(actionId)}`, {
      headers: this.headers(false),
    });
  }

  artifactUrl(actionId: string): string {
    return `${this.baseUrl}/actions/${encodeURIComponent(actionId)}/artifact`;
  }

  async uploadAdapter(
    projectId: string,
    archive: Blob,
    taskId: string,
    datasetId: string,
  ): Promise<AdapterInfo> {
    const form = new FormData();
    form.append("archive", archive, "adapter.zip");
    form.append("task_id", taskId);
    form.append("dataset_id", datasetId);
    return this.request<AdapterInfo>(`/projects/${encodeURIComponent(projectId)}/adapters`, {
      method: "POST",
      headers: this.headers(false),
      body: form,
    });
  }
}
